//! Acceptance suite: one test per release criterion, each printing a
//! one-line verdict. Run with `cargo test -p rrest-core --test acceptance`
//! (add `-- --nocapture` to see the per-criterion lines).

use std::time::Instant;

use rand::Rng as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rrest_core::bounds::{self, VerdictAl};
use rrest_core::ensembles::{self, ScenarioConfig};
use rrest_core::estimators;
use rrest_core::matrix::Matrix;
use rrest_core::model::{self, LinearModel};
use rrest_core::mse::{self, EstimatorFamily};

const TABLE_GAMMAS: [f64; 4] = [3.889, 2.426, 0.923, 0.003];
const TABLE_SIGMAS: [f64; 4] = [3.894, 2.435, 0.934, 0.022];
const TABLE_EPS: f64 = 4.928e-4;
const TABLE_DELTA_NORM: f64 = 0.034;

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

#[test]
fn criterion_01_generic_closed_form_equals_exact_trace() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut max_residual = 0.0f64;
    for _ in 0..100 {
        let m = rng.random_range(3..=16usize);
        let n = m + rng.random_range(0..=3usize);
        let pair = ensembles::sample_generic_pair(&mut rng, n, m);
        let r = pair.r();
        let h_pert = pair.h_perturbed();
        let eps = pair.epsilon();
        let cases = [
            (
                EstimatorFamily::Mmse,
                estimators::mmse(&h_pert, eps).unwrap(),
            ),
            (
                EstimatorFamily::RMmse,
                estimators::r_mmse(&h_pert, eps, r).unwrap(),
            ),
            (
                EstimatorFamily::RSvd,
                estimators::r_svd(&h_pert, r).unwrap(),
            ),
        ];
        for (family, est) in cases {
            let exact = mse::mse_exact(&est, pair.base()).unwrap();
            let closed = mse::closed_form_generic(&pair, family, r).unwrap().total;
            max_residual = max_residual.max(relative_gap(exact, closed));
        }
    }
    let elapsed = start.elapsed();
    assert!(
        max_residual < 1e-10,
        "max relative residual {max_residual:.3e}"
    );
    assert!(elapsed.as_secs_f64() < 10.0, "runtime {elapsed:?}");
    println!(
        "criterion 01 (generic closed form vs exact trace, 100 pairs): PASS: max rel residual {max_residual:.2e}, {elapsed:.2?}"
    );
}

#[test]
fn criterion_02_shared_vector_specialization() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut max_residual = 0.0f64;
    for _ in 0..100 {
        let m = rng.random_range(2..=8usize);
        let n = m + rng.random_range(0..=3usize);
        let pair = ensembles::sample_shared_vector_pair(&mut rng, n, m);
        let r = pair.r();
        for family in [
            EstimatorFamily::Mmse,
            EstimatorFamily::RMmse,
            EstimatorFamily::RSvd,
        ] {
            let shared =
                mse::closed_form_shared(family, pair.gammas(), pair.sigmas(), pair.epsilon(), r)
                    .unwrap()
                    .total;
            let generic = mse::closed_form_generic(&pair, family, r).unwrap().total;
            max_residual = max_residual.max(relative_gap(shared, generic));
        }
    }
    assert!(
        max_residual < 1e-10,
        "max relative residual {max_residual:.3e}"
    );
    println!(
        "criterion 02 (shared-vector specialization, 100 pairs): PASS: max rel residual {max_residual:.2e}"
    );
}

#[test]
fn criterion_03_monte_carlo_agreement() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut within = 0;
    let total = 20;
    for trial in 0..total {
        let m = rng.random_range(3..=5usize);
        let n = m + rng.random_range(0..=2usize);
        let pair = ensembles::sample_generic_pair(&mut rng, n, m);
        let h_pert = pair.h_perturbed();
        let eps = pair.epsilon();
        let est = match trial % 4 {
            0 => estimators::mmse(&h_pert, eps).unwrap(),
            1 => estimators::r_mmse(&h_pert, eps, pair.r()).unwrap(),
            2 => estimators::r_svd(&h_pert, pair.r()).unwrap(),
            _ => estimators::ridge(&h_pert, eps * rng.random_range(0.5..2.0)).unwrap(),
        };
        let exact = mse::mse_exact(&est, pair.base()).unwrap();
        let mc = ensembles::monte_carlo_mse(&est, pair.base(), 1_000_000, &mut rng);
        if (mc.estimate - exact).abs() <= 3.0 * mc.stderr {
            within += 1;
        }
    }
    let elapsed = start.elapsed();
    assert!(
        within >= 18,
        "only {within}/{total} runs within 3 standard errors"
    );
    assert!(elapsed.as_secs_f64() < 60.0, "runtime {elapsed:?}");
    println!(
        "criterion 03 (Monte Carlo vs exact MSE at N=1e6): PASS: {within}/{total} within 3 se, {elapsed:.2?}"
    );
}

#[test]
fn criterion_04_landscape_constants() {
    let ext = mse::extremal_constants().unwrap();
    assert!(
        (ext.a_max - 0.033).abs() <= 1e-3,
        "A maximum {} outside 0.033 +/- 0.001",
        ext.a_max
    );
    assert!(
        (ext.a_argmax.0 - 1.394).abs() <= 0.01 && (ext.a_argmax.1 - 2.611).abs() <= 0.01,
        "A argmax {:?} outside (1.394, 2.611) +/- 0.01",
        ext.a_argmax
    );

    // The B supremum is approached along gamma -> 0 at sigma = sqrt(eps).
    assert!((ext.b_sup - 0.25).abs() <= 1e-4);
    for eps in [1e-6, 1e-2, 1.0] {
        let eps: f64 = eps;
        let near = mse::term_b(1e-9 * eps.sqrt(), eps.sqrt(), eps);
        assert!(
            (near - 0.25).abs() <= 1e-4,
            "B near-supremum {near} at eps {eps}"
        );
    }
    println!(
        "criterion 04 (landscape extrema): PASS: A max {:.4} at ({:.3}, {:.3}), B sup {}",
        ext.a_max, ext.a_argmax.0, ext.a_argmax.1, ext.b_sup
    );
}

#[test]
fn criterion_05_positivity_region_grid() {
    let steps = 200;
    let eps = 1.0;
    let mut checked = 0usize;
    for gi in 0..steps {
        for si in 0..steps {
            let a_gamma = 10.0 * (gi as f64 + 1.0) / steps as f64;
            let a_sigma = 10.0 * (si as f64 + 1.0) / steps as f64;
            let regions = mse::positivity_regions(a_sigma, eps);
            let a = mse::term_a(a_gamma, a_sigma, eps);
            let b = mse::term_b(a_gamma, a_sigma, eps);

            match regions.a_interval {
                Some((lo, hi)) => {
                    if (a_gamma - lo).abs() > 1e-9 && (a_gamma - hi).abs() > 1e-9 {
                        let inside = a_gamma > lo && a_gamma < hi;
                        assert_eq!(
                            a > 0.0,
                            inside,
                            "A sign mismatch at ({a_gamma}, {a_sigma}): A = {a}, interval ({lo}, {hi})"
                        );
                        checked += 1;
                    }
                }
                None => {
                    assert!(
                        a <= 1e-15,
                        "A = {a} positive with no region at sigma {a_sigma}"
                    );
                    checked += 1;
                }
            }

            let (b_lo, b_hi) = regions.b_lower_interval;
            let upper_lo = regions.b_upper_lo;
            if (a_gamma - b_hi).abs() > 1e-9 && (a_gamma - upper_lo).abs() > 1e-9 {
                let inside = (a_gamma > b_lo && a_gamma < b_hi) || a_gamma > upper_lo;
                assert_eq!(
                    b > 0.0,
                    inside,
                    "B sign mismatch at ({a_gamma}, {a_sigma}): B = {b}"
                );
            }
        }
    }
    println!("criterion 05 (positivity regions on 200x200 grid): PASS: {checked} sign checks");
}

#[test]
fn criterion_06_decomposition_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut max_residual = 0.0f64;
    for _ in 0..1000 {
        let m = rng.random_range(2..=10usize);
        let r = rng.random_range(1..m);
        let eps = 10f64.powf(rng.random_range(-6.0..-2.0));
        let mut gammas = Vec::with_capacity(m);
        let mut current = 10f64.powf(rng.random_range(-1.0..2.0));
        for _ in 0..m {
            gammas.push(current);
            current /= 10f64.powf(rng.random_range(0.15..0.7));
        }
        let ratio = rng.random_range(0.9..1.1);
        let sigmas: Vec<f64> = gammas.iter().map(|&g| g * ratio).collect();
        let report = mse::decomposition_identities(&gammas, &sigmas, eps, r).unwrap();
        max_residual = max_residual.max(report.max_residual);
    }
    assert!(max_residual < 1e-10, "max residual {max_residual:.3e}");
    println!(
        "criterion 06 (decomposition identities, 1000 spectra): PASS: max residual {max_residual:.2e}"
    );
}

#[test]
fn criterion_07_singular_value_containment() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut tested = 0;
    while tested < 1000 {
        let m = rng.random_range(2..=6usize);
        let n = m + rng.random_range(0..=3usize);
        let h = ensembles::gaussian_matrix(n, m, 1.0, &mut rng);
        let Ok(base_svd) = model::decompose(&h) else {
            continue;
        };
        let gammas = base_svd.singulars;
        let direction = ensembles::gaussian_matrix(n, m, 1.0, &mut rng);
        let scale: f64 = rng.random_range(0.05..0.95);
        let delta = &direction * (scale * gammas[m - 1] / bounds::spectral_norm(&direction));
        let d = bounds::spectral_norm(&delta);
        let Ok(pert_svd) = model::decompose(&(&h + &delta)) else {
            continue;
        };
        for (&gamma, &s) in gammas.iter().zip(&pert_svd.singulars) {
            let (lo, hi) = bounds::sv_interval(gamma, d).expect("hypothesis holds");
            assert!(
                s >= lo - 1e-12 && s <= hi + 1e-12,
                "containment violated: sigma {s} outside [{lo}, {hi}]"
            );
        }
        tested += 1;
    }
    println!("criterion 07 (singular value containment, 1000 pairs): PASS");
}

#[test]
fn criterion_08_dominance_and_rotation_bounds() {
    // Part 1: dominance inequalities over 500 classified fuzz pairs.
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut min_slack = f64::INFINITY;
    for trial in 0..500 {
        let m = 3 + trial % 3;
        let n = m + trial % 3;
        let r = 1 + trial % (m - 1);
        let pair = ensembles::sample_separated_pair(&mut rng, n, m, r);
        for entry in bounds::diagonal_dominance_report(&pair).unwrap() {
            min_slack = min_slack.min(entry.slack_diag_sum);
            if let Some(gated) = entry.gated {
                min_slack = min_slack.min(gated.min_slack());
            }
        }
    }
    assert!(min_slack >= -1e-12, "dominance slack {min_slack:.3e}");

    // Part 2: projection envelope and rotation-angle bounds over 1000
    // generic perturbations with nonzero gaps.
    let mut tested = 0;
    let mut worst_margin = f64::INFINITY;
    while tested < 1000 {
        let m = rng.random_range(2..=5usize);
        let n = m + rng.random_range(0..=3usize);
        let a = ensembles::gaussian_matrix(n, m, 1.0, &mut rng);
        let e =
            ensembles::gaussian_matrix(n, m, 10f64.powf(rng.random_range(-3.0..-0.5)), &mut rng);
        for entry in match bounds::stewart_envelope(&a, &e) {
            Ok(v) => v,
            Err(_) => continue,
        } {
            assert!(entry.holds, "envelope violated: {entry:?}");
        }
        let i = rng.random_range(0..m);
        let j = if tested % 3 == 0 {
            rng.random_range(0..m)
        } else {
            i
        };
        let Ok(b) = bounds::angle_bounds(&a, &e, i, j) else {
            continue;
        };
        worst_margin = worst_margin.min(b.wedin_rhs - b.wedin_lhs);
        assert!(b.wedin_lhs <= b.wedin_rhs + 1e-12);
        let (lhs, rhs) = b.dopico.expect("positive combined gap");
        worst_margin = worst_margin.min(rhs - lhs);
        assert!(lhs <= rhs + 1e-12);
        tested += 1;
    }
    println!(
        "criterion 08 (dominance + envelope + rotation bounds): PASS: min dominance slack {min_slack:.2e}, min angle margin {worst_margin:.2e}"
    );
}

#[test]
fn criterion_09_certificate_bounds_and_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut max_identity_residual = 0.0f64;
    let mut gated = 0;
    for trial in 0..500 {
        let m = 3 + trial % 3;
        let n = m + trial % 2;
        let r = 1 + trial % (m - 1);
        let pair = ensembles::sample_separated_pair(&mut rng, n, m, r);
        let report = bounds::robustness_certificates(&pair);

        // (a) Gap bounds on the gated corpus.
        if report.rho_gate {
            gated += 1;
            let gaps = mse::corollary_gaps(&pair, r).unwrap();
            assert!(
                gaps.gap_rmmse <= report.rhs_el + 1e-10,
                "reduced-rank gap {} above bound {}",
                gaps.gap_rmmse,
                report.rhs_el
            );
            assert!(
                gaps.gap_rsvd <= report.rhs_ter + 1e-10,
                "truncation gap {} above bound {}",
                gaps.gap_rsvd,
                report.rhs_ter
            );
        }

        // (b) Exactness of the losing-Wiener identity on every pair.
        let j_mmse = mse::closed_form_generic(&pair, EstimatorFamily::Mmse, r)
            .unwrap()
            .total;
        let j_rmmse = mse::closed_form_generic(&pair, EstimatorFamily::RMmse, r)
            .unwrap()
            .total;
        let lhs = report.lhs_al - (m as f64 - r as f64);
        let residual = ((j_mmse - j_rmmse) - lhs).abs() / (j_mmse - j_rmmse).abs().max(1.0);
        max_identity_residual = max_identity_residual.max(residual);
    }
    assert!(
        gated >= 450,
        "rho gate unexpectedly failed often: {gated}/500"
    );
    assert!(
        max_identity_residual < 1e-10,
        "identity residual {max_identity_residual:.3e}"
    );
    println!(
        "criterion 09 (certificate gap bounds + exact identity): PASS: {gated}/500 gated, identity residual {max_identity_residual:.2e}"
    );
}

#[test]
fn criterion_10_published_spectra_reproduction() {
    // SNR from the published spectra.
    let h = Matrix::from_diagonal(&nalgebra::DVector::from_row_slice(&TABLE_GAMMAS));
    let model = LinearModel::new(h, TABLE_EPS).unwrap();
    let snr_db = model::snr_db(&model);
    assert!((snr_db - 40.4).abs() <= 0.5, "SNR {snr_db} dB");

    // Separation measures.
    let sep = bounds::separation_from_spectra(&TABLE_GAMMAS, &TABLE_SIGMAS, 3, TABLE_DELTA_NORM);
    for (rho, want) in sep.rhos.iter().zip([0.9995, 0.9995, 0.9987]) {
        assert!((rho - want).abs() <= 5e-4, "rho {rho} vs {want}");
    }

    // Shared-form MSE values.
    let j = |family| {
        mse::closed_form_shared(family, &TABLE_GAMMAS, &TABLE_SIGMAS, TABLE_EPS, 3)
            .unwrap()
            .total
    };
    let (j_mmse, j_rmmse, j_rsvd) = (
        j(EstimatorFamily::Mmse),
        j(EstimatorFamily::RMmse),
        j(EstimatorFamily::RSvd),
    );
    assert!((j_mmse - 1.116).abs() <= 0.02, "J full {j_mmse}");
    assert!((j_rmmse - 1.008).abs() <= 0.02, "J reduced {j_rmmse}");
    assert!((j_rsvd - 1.008).abs() <= 0.02, "J truncated {j_rsvd}");

    // Per-index term sums.
    let sum_a: f64 = (0..3)
        .map(|i| mse::term_a(TABLE_GAMMAS[i], TABLE_SIGMAS[i], TABLE_EPS))
        .sum();
    assert!((sum_a - 1.3e-5).abs() <= 5e-5, "sum of A {sum_a}");

    // Certificate bounds.
    let split = bounds::bound_el_ter_split(&TABLE_GAMMAS, &TABLE_SIGMAS, TABLE_EPS, &sep, 3);
    assert!(
        (split.rhs_el() - 0.1404).abs() <= 5e-3,
        "rhs {}",
        split.rhs_el()
    );
    assert!(
        (split.rhs_ter() - 0.1405).abs() <= 5e-3,
        "rhs {}",
        split.rhs_ter()
    );

    println!(
        "criterion 10 (published-spectra reproduction): PASS: SNR {snr_db:.1} dB, J = ({j_mmse:.4}, {j_rmmse:.4}, {j_rsvd:.4}), bounds ({:.4}, {:.4})",
        split.rhs_el(),
        split.rhs_ter()
    );
}

#[test]
fn criterion_11_scenario_statistics() {
    let start = Instant::now();
    let cfg = ScenarioConfig::default();
    let total = 50;
    let mut certified_worse = 0;
    let mut small_gap = 0;
    for seed in 0..total {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scenario = ensembles::generate_scenario(&cfg, &mut rng).unwrap();
        let pair = &scenario.pair;
        let r = pair.r();
        let report = bounds::robustness_certificates(pair);
        let j_mmse = mse::closed_form_generic(pair, EstimatorFamily::Mmse, r)
            .unwrap()
            .total;
        let j_rmmse = mse::closed_form_generic(pair, EstimatorFamily::RMmse, r)
            .unwrap()
            .total;
        let j_rsvd = mse::closed_form_generic(pair, EstimatorFamily::RSvd, r)
            .unwrap()
            .total;
        if report.verdict_al == VerdictAl::MmseWorse && j_mmse > j_rmmse {
            certified_worse += 1;
        }
        if (j_rmmse - j_rsvd).abs() < 1e-2 {
            small_gap += 1;
        }
    }
    let elapsed = start.elapsed();
    assert!(
        certified_worse * 10 >= total * 9,
        "certified worse in only {certified_worse}/{total}"
    );
    assert!(
        small_gap * 10 >= total * 9,
        "reduced/truncated gap small in only {small_gap}/{total}"
    );
    assert!(elapsed.as_secs_f64() < 300.0, "runtime {elapsed:?}");
    println!(
        "criterion 11 (scenario statistics over {total} draws): PASS: worse {certified_worse}/{total}, small gap {small_gap}/{total}, {elapsed:.2?}"
    );
}

#[test]
fn criterion_12_ensemble_tail_statistics() {
    // Condition-number tail at t = 250 for 4x4 matrices.
    let mut rng = ChaCha8Rng::seed_from_u64(1212);
    let n_samples = 100_000;
    let t = 250.0;
    let m = 4usize;
    let mut hits = 0u32;
    for _ in 0..n_samples {
        let a = ensembles::gaussian_matrix(m, m, 1.0, &mut rng);
        if ensembles::condition_number(&a) > m as f64 * t {
            hits += 1;
        }
    }
    let freq = hits as f64 / n_samples as f64;
    let (lower, upper) = ensembles::condition_tail_bounds(t);
    assert!(
        freq > lower && freq < upper,
        "condition tail frequency {freq} outside ({lower}, {upper})"
    );

    // Smallest singular value distribution at m = 200.
    let m_big = 200usize;
    let n_draws = 2000;
    let cutoff = (1.0 / m_big as f64).sqrt(); // m * gamma_min^2 <= 1
    let mut below = 0u32;
    for _ in 0..n_draws {
        let a = ensembles::gaussian_matrix(m_big, m_big, 1.0, &mut rng);
        if ensembles::smallest_singular_value_fast(&a) <= cutoff {
            below += 1;
        }
    }
    let freq_small = below as f64 / n_draws as f64;
    let asymptotic = ensembles::smallest_sv_cdf(1.0);
    assert!(
        (freq_small - asymptotic).abs() <= 0.05,
        "smallest-sv frequency {freq_small} vs asymptotic {asymptotic}"
    );

    println!(
        "criterion 12 (ensemble tails): PASS: cond tail {freq:.4} in ({lower:.4}, {upper:.4}), smallest-sv {freq_small:.3} vs {asymptotic:.3}"
    );
}
