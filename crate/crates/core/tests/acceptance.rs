//! Acceptance suite: every criterion below is pinned to its stated tolerance
//! and prints one PASS/FAIL line (run with `--nocapture` to see them).

use hep_core::combinadics;
use hep_core::current::{
    critical_density, current_density_relation, density_grid, stationary_current_finite,
};
use hep_core::duality::{domain_walk_check, intertwining_residual};
use hep_core::generator::{
    build_hep_generator, build_hep_generator_from_rates, reflection_condition_check,
    stationary_distribution,
};
use hep_core::lattice::{coords_from_occupation, headways, TorusConfiguration};
use hep_core::measures::{
    canonical_log_partition, zrp_canonical_marginal, MeasureTable, ZrpEnsemble,
};
use hep_core::potential::{PotentialSpec, TailRule};
use hep_core::simulator::{simulate, Geometry, SimulationConfig};
use hep_core::stats::{mean_and_se, total_variation};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn report(id: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {id}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{id} failed: {detail}");
}

fn log_distance_potential() -> PotentialSpec {
    let j: Vec<f64> = (1..=1024).map(|r| (r as f64).ln()).collect();
    PotentialSpec::from_table(j, TailRule::Constant).unwrap()
}

fn test_potentials() -> Vec<(&'static str, PotentialSpec)> {
    vec![
        ("constant", PotentialSpec::constant()),
        ("log-distance", log_distance_potential()),
        ("bfamily(4)", PotentialSpec::bfamily(4.0).unwrap()),
    ]
}

/// Criterion 1: the exact stationary distribution of the generator equals
/// the canonical headway measure, TV <= 1e-10, for all L <= 8 and every
/// drive direction.
#[test]
fn criterion_01_invariance_of_headway_measures() {
    let mut worst = 0.0f64;
    for (name, base) in test_potentials() {
        for &(right, left) in &[(1.0, 0.0), (1.0, 1.0), (1.7, 0.6)] {
            let spec = base.clone().with_asymmetry(right, left).unwrap();
            for l in 2..=8usize {
                for n in 1..l {
                    let q = build_hep_generator(l, n, &spec).unwrap();
                    let stationary = stationary_distribution(&q).unwrap();
                    let canonical = MeasureTable::canonical(l, n, &spec).unwrap();
                    let tv = stationary.total_variation(&canonical);
                    assert!(
                        tv <= 1e-10,
                        "{name} (r={right}, l={left}) L={l} N={n}: TV = {tv:e}"
                    );
                    worst = worst.max(tv);
                }
            }
        }
    }
    report(
        "1 invariance",
        worst <= 1e-10,
        &format!("max TV over potentials, drives and L<=8: {worst:.3e}"),
    );
}

/// Criterion 2: enumeration of the canonical partition function agrees with
/// the site/particle-swapped convolution identity to 1e-10 in log-domain for
/// all L <= 12.
#[test]
fn criterion_02_partition_function_identity() {
    let mut worst = 0.0f64;
    for (name, spec) in test_potentials() {
        for l in 1..=12usize {
            for n in 0..=l {
                let enumerated = MeasureTable::canonical(l, n, &spec).unwrap().log_partition();
                let identity = canonical_log_partition(l, n, &spec).unwrap();
                let diff = (enumerated - identity).abs();
                assert!(diff <= 1e-10, "{name} L={l} N={n}: {diff:e}");
                worst = worst.max(diff);
            }
        }
    }
    report(
        "2 partition identity",
        worst <= 1e-10,
        &format!("max log-domain gap over L<=12: {worst:.3e}"),
    );
}

/// Criterion 3: the constant potential reproduces w rho (1 - rho) to 1e-8 on
/// a 0.01-step grid, with u_c = 1 and rho_c = 0.
#[test]
fn criterion_03_tasep_reduction() {
    let spec = PotentialSpec::constant();
    let grid = density_grid(0.01, 0.99, 0.01).unwrap();
    let curve = current_density_relation(&spec, &grid, 1e-13).unwrap();
    let mut worst = 0.0f64;
    for s in &curve.samples {
        worst = worst.max((s.current - s.rho * (1.0 - s.rho)).abs());
    }
    let pass = worst <= 1e-8 && curve.u_c == 1.0 && curve.rho_c == 0.0;
    report(
        "3 TASEP reduction",
        pass,
        &format!(
            "max |j - rho(1-rho)| = {worst:.3e}, u_c = {}, rho_c = {}",
            curve.u_c, curve.rho_c
        ),
    );
}

/// Criterion 4: constant-rate finite-size currents match the binomial
/// closed form for every L <= 400, and a simulation at (L=20, N=10, t=1e4,
/// 16 replicas) agrees within 3 standard errors and 2% relative error.
#[test]
fn criterion_04_finite_size_current() {
    let spec = PotentialSpec::constant();
    let mut worst = 0.0f64;
    for l in 2..=400usize {
        for n in [1, l / 4, l / 2, 3 * l / 4, l - 1] {
            if n == 0 || n >= l {
                continue;
            }
            let expect = n as f64 * (l - n) as f64 / (l as f64 * (l as f64 - 1.0));
            let got = stationary_current_finite(l, n, &spec).unwrap();
            let rel = (got - expect).abs() / expect;
            assert!(rel <= 1e-10, "L={l} N={n}: rel err {rel:e}");
            worst = worst.max(rel);
        }
    }

    let (l, n) = (20usize, 10usize);
    let exact = stationary_current_finite(l, n, &spec).unwrap();
    let cfg = SimulationConfig::new(Geometry::Torus { l, n }, 1e4, 20260810)
        .unwrap()
        .with_replicas(16)
        .unwrap();
    let init = hep_core::lattice::CoordinateConfiguration::torus(
        l,
        (0..n as i64).map(|i| 2 * i).collect(),
    )
    .unwrap();
    let stats = simulate(&spec, &cfg, &init).unwrap();
    let (mean, se) = mean_and_se(&stats.per_replica_current);
    let dev = (mean - exact).abs();
    let rel = dev / exact;
    let pass = dev <= 3.0 * se && rel < 0.02;
    report(
        "4 finite-size current",
        pass,
        &format!(
            "max DP deviation {worst:.2e}; simulation {mean:.6} vs exact {exact:.6} \
             ({:.2} SE, rel {rel:.4})",
            dev / se
        ),
    );
}

/// Criterion 5: for the condensation family b = 4 the critical density is
/// 2/3 (to 1e-3); below it the finite-size currents at L = 400 sit within 2%
/// of the linear plateau and approach it monotonically in L.
#[test]
fn criterion_05_condensation_plateau() {
    let spec = PotentialSpec::bfamily(4.0).unwrap();
    let rho_c = critical_density(&spec, 1e-13).unwrap();
    let rho_c_ok = (rho_c - 2.0 / 3.0).abs() <= 1e-3;

    // Plateau value w rho phi(1/rho_c - 1) = w rho u_c.
    let u_c = spec.radius_of_convergence();
    let mut max_rel_at_400 = 0.0f64;
    let mut monotone = true;
    let mut per_rho = String::new();
    for rho in [0.1, 0.2, 0.3, 0.4, 0.5, 0.6] {
        let plateau = rho * u_c;
        let mut last_dev = f64::INFINITY;
        for l in [50usize, 100, 200, 400] {
            let n = (rho * l as f64).round() as usize;
            let j = stationary_current_finite(l, n, &spec).unwrap();
            let dev = (j - plateau).abs();
            if dev >= last_dev {
                monotone = false;
            }
            last_dev = dev;
            if l == 400 {
                max_rel_at_400 = max_rel_at_400.max(dev / plateau);
                per_rho.push_str(&format!(" rho={rho}: {:.4};", dev / plateau));
            }
        }
    }
    // Note: the exact finite-size deviation from the plateau is of order
    // b / (L (1 - 3 rho / 2)) in the condensed regime (the partition ratio
    // is g at the condensate size), so the 2% bound cannot hold at L = 400
    // for rho near the critical density; see the per-rho numbers below.
    let pass = rho_c_ok && max_rel_at_400 <= 0.02 && monotone;
    report(
        "5 condensation plateau",
        pass,
        &format!(
            "rho_c = {rho_c:.6} (target 2/3 ± 1e-3: {rho_c_ok}), monotone in L: {monotone}, \
             relative plateau gap at L=400 (bound 0.02):{per_rho} max {max_rel_at_400:.4}"
        ),
    );
}

/// Criterion 6: rates derived from any potential satisfy the reflection
/// condition at every L <= 64; a deliberately L-bound rate family satisfies
/// it at one L, is invariant there, and breaks invariance at L + 1.
#[test]
fn criterion_06_reflection_and_uniqueness_probe() {
    let mut worst = 0.0f64;
    for (_, spec) in test_potentials() {
        for l in 3..=64usize {
            worst = worst.max(reflection_condition_check(l, &spec).unwrap());
        }
    }
    let derived_ok = worst <= 1e-12;

    let spec = log_distance_potential();
    let l0 = 7usize;
    let rates: Vec<f64> = (0..=l0 + 1)
        .map(|r| {
            if r == 0 {
                0.0
            } else {
                let sym = 1.0 + 0.3 * r.min((l0 - 1).saturating_sub(r)) as f64;
                sym * (spec.log_y(r) - spec.log_y(r + 1)).exp()
            }
        })
        .collect();
    let refl_at_l0 =
        hep_core::generator::reflection_violation_with_rates(l0, &rates, &spec).unwrap();
    let q = build_hep_generator_from_rates(l0, 2, &rates, 1.0, 0.0).unwrap();
    let tv_l0 = stationary_distribution(&q)
        .unwrap()
        .total_variation(&MeasureTable::canonical(l0, 2, &spec).unwrap());
    let q_next = build_hep_generator_from_rates(l0 + 1, 2, &rates, 1.0, 0.0).unwrap();
    let tv_next = stationary_distribution(&q_next)
        .unwrap()
        .total_variation(&MeasureTable::canonical(l0 + 1, 2, &spec).unwrap());
    let probe_ok = refl_at_l0 <= 1e-12 && tv_l0 <= 1e-10 && tv_next > 1e-3;
    report(
        "6 reflection/uniqueness",
        derived_ok && probe_ok,
        &format!(
            "max derived-rate violation {worst:.2e}; probe at L={l0}: refl {refl_at_l0:.2e}, \
             TV {tv_l0:.2e}, TV at L+1 {tv_next:.3e}"
        ),
    );
}

/// Criterion 7: the intertwining identity of the duality matrix with the
/// process and dual-walk generators holds to 1e-12 on interior columns for
/// N in {1, 2, 3} and both rate families.
#[test]
fn criterion_07_intertwining() {
    let mut worst = 0.0f64;
    for (name, spec) in [
        ("bfamily(4)", PotentialSpec::bfamily(4.0).unwrap()),
        ("geometric(2)", PotentialSpec::geometric(2.0).unwrap()),
    ] {
        for (n, width) in [(1usize, 24i64), (2, 24), (3, 30)] {
            let rep = intertwining_residual(n, (0, width - 1), &spec, 1e-13).unwrap();
            assert!(
                rep.residual <= 1e-12,
                "{name} N={n}: residual {:e}",
                rep.residual
            );
            worst = worst.max(rep.residual);
        }
    }
    report(
        "7 intertwining",
        worst <= 1e-12,
        &format!("max interior residual: {worst:.3e}"),
    );
}

/// Criterion 8: starting from the pinned-domain measure with N = 4, b = 4,
/// w = 1, the leftmost-particle law at t = 5 is Poisson(5) (TV <= 0.02 and
/// chi-square p > 0.01), the time-t gaps keep the initial law (TV <= 0.02),
/// and the mean displacement is within 3 sigma of w t.
#[test]
fn criterion_08_domain_random_walk() {
    let spec = PotentialSpec::bfamily(4.0).unwrap();
    let rep = domain_walk_check(&spec, 4, 0, 5.0, 100_000, 77, 1e-13).unwrap();
    let mean_ok = (rep.mean_displacement - rep.expected_displacement).abs() <= rep.three_sigma;
    let pass = rep.leftmost_tv <= 0.02
        && rep.leftmost_chi2_p > 0.01
        && rep.gap_tv <= 0.02
        && mean_ok;
    report(
        "8 domain random walk",
        pass,
        &format!(
            "leftmost TV {:.4} (p = {:.3}), gap TV {:.4}, mean displacement {:.4} vs {:.1} \
             (3-sigma {:.4})",
            rep.leftmost_tv,
            rep.leftmost_chi2_p,
            rep.gap_tv,
            rep.mean_displacement,
            rep.expected_displacement,
            rep.three_sigma
        ),
    );
}

/// Criterion 9: the one-site canonical marginal of the zero-range ensemble
/// at density 0.25 converges to the grand canonical marginal at the matched
/// fugacity: TV decreasing over N in {50, 100, 200, 400}, ending <= 0.01.
#[test]
fn criterion_09_equivalence_of_ensembles() {
    let spec = PotentialSpec::bfamily(4.0).unwrap();
    let rho = 0.25;
    let ens = ZrpEnsemble::new(&spec, 1e-13).unwrap();
    let z = ens.fugacity(rho).unwrap();
    let mut last_tv = f64::INFINITY;
    let mut monotone = true;
    for sites in [50usize, 100, 200, 400] {
        let particles = (rho * sites as f64).floor() as usize;
        let canonical: Vec<f64> = (0..=particles)
            .map(|k| zrp_canonical_marginal(sites, particles, &[k], &spec).unwrap())
            .collect();
        let grand = ens.nu_vec(z, particles).unwrap();
        let tv = total_variation(&canonical, &grand);
        if tv >= last_tv {
            monotone = false;
        }
        last_tv = tv;
    }
    let pass = monotone && last_tv <= 0.01;
    report(
        "9 equivalence of ensembles",
        pass,
        &format!("TV monotone: {monotone}, TV at N=400: {last_tv:.5}"),
    );
}

/// Criterion 10: the headway-indicator identities and the headway-sum
/// invariant hold on 10^4 random configurations each, with zero violations.
#[test]
fn criterion_10_headway_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let mut checked_sum = 0usize;
    let mut checked_identities = 0usize;
    for _ in 0..10_000 {
        let l = rng.random_range(1..=24usize);
        let occ: Vec<bool> = (0..l).map(|_| rng.random::<bool>()).collect();
        let cfg = TorusConfiguration::new(occ).unwrap();
        let n = cfg.particle_count();

        if n >= 1 {
            let hs = headways(&coords_from_occupation(&cfg)).unwrap();
            assert_eq!(hs.finite_sum(), l - n, "headway sum violated on {cfg}");
            checked_sum += 1;
        }

        let x = rng.random_range(0..l);
        let m = rng.random_range(0..l);
        let h = cfg.headway_indicator(x, m);
        // Idempotence, occupation factor, right-neighbor exclusion, and the
        // wrap-around cutoff with a particle at the origin.
        assert_eq!(h && h, h);
        assert_eq!(cfg.occupied(x) && h, h);
        if m >= 1 {
            assert!(!(cfg.occupied(x + 1) && h), "blocked site has headway {m}");
            if cfg.occupied(0) && x >= l - m {
                assert!(!h, "origin-interrupted gap reported on {cfg}");
            }
        }
        let hits = (0..l).filter(|&k| cfg.headway_indicator(x, k)).count();
        assert_eq!(hits, usize::from(cfg.occupied(x)));
        checked_identities += 1;
    }
    report(
        "10 headway identities",
        checked_sum >= 5_000 && checked_identities == 10_000,
        &format!(
            "{checked_identities} configurations, {checked_sum} headway-sum checks, \
             zero violations"
        ),
    );
}

/// Sanity rider for the state-index machinery used throughout the criteria.
#[test]
fn state_indexing_is_consistent() {
    for l in 1..=10usize {
        for n in 0..=l {
            let torus = hep_core::generator::TorusStates { l, n };
            for idx in 0..combinadics::binomial(l, n) as usize {
                assert_eq!(torus.index(&torus.positions(idx)), idx);
            }
        }
    }
}
