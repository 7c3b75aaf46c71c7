//! Comparisons against the brute-force reference implementations.

use cwbnlw_core::{
    singular_sites, solve_coupled, sublevel_measure, ConvolutionConfig, FourierField, LatticeIndex, ProblemParams,
    SolverConfig,
};
use cwbnlw_oracles as oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(rng: &mut ChaCha8Rng, d: usize, pairs: usize, r: i64) -> FourierField {
    let sites = (0..pairs).map(|_| {
        let m: Vec<i64> = (0..d).map(|_| rng.gen_range(-r..=r)).collect();
        (LatticeIndex::new(m, rng.gen_range(-r..=r)), rng.gen_range(-1.0..1.0))
    });
    FourierField::from_pairs(d, sites).unwrap()
}

fn to_oracle(f: &FourierField) -> oracle::Coeffs {
    f.iter().map(|(xi, v)| (xi.coords(), v)).collect()
}

#[test]
fn cube_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for d in 1..=2 {
        for _ in 0..20 {
            let f = random_field(&mut rng, d, 6, 3);
            let want = oracle::triple_convolution(&to_oracle(&f));
            for cfg in [
                ConvolutionConfig::default(),
                ConvolutionConfig {
                    fft_threshold: 0,
                    ..Default::default()
                },
            ] {
                let got = f.cube(&cfg).unwrap();
                for (s, v) in &want {
                    let ours = got.get(&LatticeIndex::from_coords(s));
                    assert!((ours - v).abs() < 1e-12, "{s:?}: {ours} vs {v}");
                }
                for (xi, v) in got.iter() {
                    if !want.contains_key(&xi.coords()) {
                        assert!(v.abs() < 1e-12);
                    }
                }
            }
        }
    }
}

#[test]
fn hierarchical_solution_matches_full_newton() {
    let (eps, p0) = (1e-3, 1.5);
    let params = ProblemParams::new(vec![1], 2f64.sqrt(), 0.05, eps).unwrap();
    let sol = solve_coupled(p0, &params, &SolverConfig::default()).unwrap();
    let full = oracle::full_system_newton(
        &oracle::FullSystem {
            d: 1,
            m0: vec![1],
            rho: 2f64.sqrt(),
            alpha: 0.05,
            eps,
            p0,
            n_trunc: 16,
        },
        30,
        1e-15,
    );
    assert!((full.lambda - sol.state.lambda).abs() < 1e-9 * full.lambda);
    // relative tolerance with a floor for coefficients at round-off size
    for (s, v) in &full.coeffs {
        let ours = sol.u.get(&LatticeIndex::from_coords(s));
        assert!((ours - v).abs() <= 1e-9 * v.abs().max(1e-6), "{s:?}: {ours:e} vs {v:e}");
    }
}

#[test]
fn singular_sites_match_bruteforce() {
    for (d, n) in [(1, 256), (2, 40)] {
        for lambda in [1.3, 2f64.sqrt(), 1.7321] {
            let b = 2.0 * (n as f64).powf(0.05);
            let got: Vec<Vec<i64>> = singular_sites(d, lambda, n, b)
                .unwrap()
                .iter()
                .map(|s| s.coords())
                .collect();
            let mut want = oracle::singular_sites_bruteforce(d, lambda, n, b);
            let mut got_sorted = got.clone();
            got_sorted.sort();
            want.sort();
            assert_eq!(got_sorted, want, "d = {d}, lambda = {lambda}");
        }
    }
}

#[test]
fn sublevel_measure_matches_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let deg = rng.gen_range(1..=4);
        let mut p: Vec<i64> = (0..=deg).map(|_| rng.gen_range(-4..=4)).collect();
        if p[deg] == 0 {
            p[deg] = 1;
        }
        let eps = 10f64.powf(rng.gen_range(-3.0..0.0));
        let exact = sublevel_measure(&p, eps, -1.0, 1.0).unwrap();
        let sampled = oracle::sublevel_measure_sampled(&p, eps, -1.0, 1.0, 400_000);
        assert!((exact - sampled).abs() < 1e-4, "{p:?} eps {eps}: {exact} vs {sampled}");
    }
}
