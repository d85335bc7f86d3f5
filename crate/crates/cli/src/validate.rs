//! `rrest validate`: drive the property suites with a configurable trial
//! budget. Prints one line per property; on the first failure a minimal
//! reproducer (seed, trial, and offending pair when applicable) is written
//! next to the outputs and the command exits nonzero.

use rand::Rng as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use rrest_core::bounds;
use rrest_core::ensembles;
use rrest_core::estimators;
use rrest_core::json::PairJson;
use rrest_core::model::PerturbedPair;
use rrest_core::mse::{self, EstimatorFamily};

use crate::out::{full, write_atomic};
use crate::{SuiteChoice, ValidateArgs, EXIT_INCONCLUSIVE, EXIT_IO, EXIT_OK};

#[derive(Serialize)]
struct Reproducer<'a> {
    suite: &'a str,
    property: &'a str,
    seed: u64,
    trial: u64,
    detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pair: Option<PairJson>,
}

/// `Err(Some(..))` carries a reproducer; `Err(None)` is an I/O failure.
type SuiteResult = Result<(), Option<Box<Failure>>>;

struct Failure {
    property: &'static str,
    trial: u64,
    detail: String,
    pair: Option<PairJson>,
}

pub fn run(args: &ValidateArgs) -> u8 {
    let outcome = match args.suite {
        SuiteChoice::Mse => run_mse(args),
        SuiteChoice::Bounds => run_bounds(args),
        SuiteChoice::Ensembles => run_ensembles(args),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Some(failure)) => {
            let suite = match args.suite {
                SuiteChoice::Mse => "mse",
                SuiteChoice::Bounds => "bounds",
                SuiteChoice::Ensembles => "ensembles",
            };
            let repro = Reproducer {
                suite,
                property: failure.property,
                seed: args.seed,
                trial: failure.trial,
                detail: failure.detail,
                pair: failure.pair,
            };
            let path = args.out.join("validate_failure.json");
            let body = serde_json::to_vec_pretty(&repro).expect("reproducer serialization");
            if let Err(e) = write_atomic(&path, &body) {
                eprintln!("failed to write reproducer {}: {e}", path.display());
                return EXIT_IO;
            }
            eprintln!(
                "{}:{} failed at trial {}: reproducer at {}",
                suite,
                repro.property,
                repro.trial,
                path.display()
            );
            EXIT_INCONCLUSIVE
        }
        Err(None) => EXIT_IO,
    }
}

fn pair_dims(rng: &mut ChaCha8Rng) -> (usize, usize) {
    let m = rng.random_range(3..=8usize);
    (m + rng.random_range(0..=2usize), m)
}

fn run_mse(args: &ValidateArgs) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let trials = args.trials;

    let mut max_oracle = 0.0f64;
    let mut max_shared = 0.0f64;
    let mut max_identity = 0.0f64;
    for trial in 0..trials {
        let (n, m) = pair_dims(&mut rng);
        let pair = ensembles::sample_generic_pair(&mut rng, n, m);
        let r = pair.r();
        let eps = pair.epsilon();
        let h_pert = pair.h_perturbed();
        let built = [
            (EstimatorFamily::Mmse, estimators::mmse(&h_pert, eps)),
            (EstimatorFamily::RMmse, estimators::r_mmse(&h_pert, eps, r)),
            (EstimatorFamily::RSvd, estimators::r_svd(&h_pert, r)),
        ];
        for (family, est) in built {
            let est = est.expect("estimator construction");
            let exact = mse::mse_exact(&est, pair.base()).expect("dimensions agree");
            let closed = mse::closed_form_generic(&pair, family, r)
                .expect("valid pair")
                .total;
            let residual = (exact - closed).abs() / exact.abs().max(closed.abs());
            max_oracle = max_oracle.max(residual);
            if residual > 1e-10 {
                return Err(Some(Box::new(Failure {
                    property: "closed-form-vs-exact",
                    trial,
                    detail: format!("{family:?} residual {residual:.3e}"),
                    pair: Some(PairJson::from_pair(&pair)),
                })));
            }
        }

        let shared_pair = ensembles::sample_shared_vector_pair(&mut rng, n, m);
        let sr = shared_pair.r();
        for family in [
            EstimatorFamily::Mmse,
            EstimatorFamily::RMmse,
            EstimatorFamily::RSvd,
        ] {
            let shared = mse::closed_form_shared(
                family,
                shared_pair.gammas(),
                shared_pair.sigmas(),
                shared_pair.epsilon(),
                sr,
            )
            .expect("valid spectra")
            .total;
            let generic = mse::closed_form_generic(&shared_pair, family, sr)
                .expect("valid pair")
                .total;
            let residual = (shared - generic).abs() / shared.abs().max(generic.abs());
            max_shared = max_shared.max(residual);
            if residual > 1e-10 {
                return Err(Some(Box::new(Failure {
                    property: "shared-vs-generic",
                    trial,
                    detail: format!("{family:?} residual {residual:.3e}"),
                    pair: Some(PairJson::from_pair(&shared_pair)),
                })));
            }
        }

        let report = mse::decomposition_identities(pair.gammas(), pair.sigmas(), pair.epsilon(), r)
            .expect("valid spectra");
        max_identity = max_identity.max(report.max_residual);
        if report.max_residual > 1e-10 {
            return Err(Some(Box::new(Failure {
                property: "decomposition-identities",
                trial,
                detail: format!("residual {:.3e}", report.max_residual),
                pair: Some(PairJson::from_pair(&pair)),
            })));
        }
    }
    println!("closed-form-vs-exact: {trials}/{trials} pass (max rel residual {max_oracle:.2e})");
    println!("shared-vs-generic: {trials}/{trials} pass (max rel residual {max_shared:.2e})");
    println!("decomposition-identities: {trials}/{trials} pass (max residual {max_identity:.2e})");
    Ok(())
}

fn run_bounds(args: &ValidateArgs) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let trials = args.trials;

    let mut min_slack = f64::INFINITY;
    let mut max_identity = 0.0f64;
    for trial in 0..trials {
        let m = 3 + (trial as usize) % 3;
        let n = m + (trial as usize) % 2;
        let r = 1 + (trial as usize) % (m - 1);
        let pair = ensembles::sample_separated_pair(&mut rng, n, m, r);

        for entry in bounds::diagonal_dominance_report(&pair).expect("classified pair") {
            min_slack = min_slack.min(entry.slack_diag_sum);
            if let Some(gated) = &entry.gated {
                min_slack = min_slack.min(gated.min_slack());
            }
        }
        if min_slack < -1e-12 {
            return Err(Some(fail_pair("dominance-slacks", trial, &pair, min_slack)));
        }

        let report = bounds::robustness_certificates(&pair);
        if report.rho_gate {
            let gaps = mse::corollary_gaps(&pair, r).expect("valid pair");
            if gaps.gap_rmmse > report.rhs_el + 1e-10 || gaps.gap_rsvd > report.rhs_ter + 1e-10 {
                return Err(Some(fail_pair(
                    "certificate-gap-bounds",
                    trial,
                    &pair,
                    gaps.gap_rmmse - report.rhs_el,
                )));
            }
        }
        let j_mmse = mse::closed_form_generic(&pair, EstimatorFamily::Mmse, r)
            .expect("valid pair")
            .total;
        let j_rmmse = mse::closed_form_generic(&pair, EstimatorFamily::RMmse, r)
            .expect("valid pair")
            .total;
        let identity = ((j_mmse - j_rmmse) - (report.lhs_al - (m - r) as f64)).abs()
            / (j_mmse - j_rmmse).abs().max(1.0);
        max_identity = max_identity.max(identity);
        if identity > 1e-10 {
            return Err(Some(fail_pair(
                "losing-wiener-identity",
                trial,
                &pair,
                identity,
            )));
        }

        // Generic perturbation bounds (containment, envelope, rotation).
        let (gn, gm) = pair_dims(&mut rng);
        let a = ensembles::gaussian_matrix(gn, gm, 1.0, &mut rng);
        let Ok(base_svd) = rrest_core::model::decompose(&a) else {
            continue;
        };
        let direction = ensembles::gaussian_matrix(gn, gm, 1.0, &mut rng);
        let scale: f64 = rng.random_range(0.05..0.95);
        let delta =
            &direction * (scale * base_svd.singulars[gm - 1] / bounds::spectral_norm(&direction));
        let d = bounds::spectral_norm(&delta);
        let Ok(pert_svd) = rrest_core::model::decompose(&(&a + &delta)) else {
            continue;
        };
        for i in 0..gm {
            let (lo, hi) = bounds::sv_interval(base_svd.singulars[i], d).expect("hypothesis");
            let s = pert_svd.singulars[i];
            if s < lo - 1e-12 || s > hi + 1e-12 {
                return Err(Some(Box::new(Failure {
                    property: "singular-value-containment",
                    trial,
                    detail: format!("sigma {s} outside [{lo}, {hi}]"),
                    pair: None,
                })));
            }
        }
        for entry in bounds::stewart_envelope(&a, &delta).expect("full rank") {
            if !entry.holds {
                return Err(Some(Box::new(Failure {
                    property: "projection-envelope",
                    trial,
                    detail: format!("{entry:?}"),
                    pair: None,
                })));
            }
        }
        let i = rng.random_range(0..gm);
        if let Ok(b) = bounds::angle_bounds(&a, &delta, i, i) {
            let dopico_ok = b.dopico.is_none_or(|(lhs, rhs)| lhs <= rhs + 1e-12);
            if b.wedin_lhs > b.wedin_rhs + 1e-12 || !dopico_ok {
                return Err(Some(Box::new(Failure {
                    property: "rotation-angle-bounds",
                    trial,
                    detail: format!("lhs {} rhs {}", b.wedin_lhs, b.wedin_rhs),
                    pair: None,
                })));
            }
        }
    }
    println!("dominance-slacks: {trials}/{trials} pass (min slack {min_slack:.2e})");
    println!("certificate-gap-bounds: {trials}/{trials} pass");
    println!("losing-wiener-identity: {trials}/{trials} pass (max residual {max_identity:.2e})");
    println!("singular-value-containment: {trials}/{trials} pass");
    println!("projection-envelope: {trials}/{trials} pass");
    println!("rotation-angle-bounds: {trials}/{trials} pass");
    Ok(())
}

fn fail_pair(property: &'static str, trial: u64, pair: &PerturbedPair, value: f64) -> Box<Failure> {
    Box::new(Failure {
        property,
        trial,
        detail: format!("violation {value:.3e}"),
        pair: Some(PairJson::from_pair(pair)),
    })
}

fn run_ensembles(args: &ValidateArgs) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let trials = args.trials.max(100);
    let mut rows = String::from("t,empirical,lower,upper\n");
    let mut ok = true;
    let mut first_failure: Option<Box<Failure>> = None;

    // Condition-number tail at t = 250 for 4x4 standard normal matrices.
    let t = 250.0;
    let mut hits = 0u64;
    for _ in 0..trials {
        let a = ensembles::gaussian_matrix(4, 4, 1.0, &mut rng);
        if ensembles::condition_number(&a) > 4.0 * t {
            hits += 1;
        }
    }
    let freq = hits as f64 / trials as f64;
    let (lo, hi) = ensembles::condition_tail_bounds(t);
    rows.push_str(&format!(
        "{},{},{},{}\n",
        full(t),
        full(freq),
        full(lo),
        full(hi)
    ));
    println!("condition-tail: empirical {freq:.4} in ({lo:.4}, {hi:.4}) over {trials} draws");
    if freq <= lo || freq >= hi {
        ok = false;
        first_failure.get_or_insert(Box::new(Failure {
            property: "condition-tail",
            trial: trials,
            detail: format!("frequency {freq} outside ({lo}, {hi})"),
            pair: None,
        }));
    }

    // Smallest singular value distribution at m = 200 (asymptotic formula).
    let draws = (trials / 50).clamp(100, 5000);
    let m_big = 200usize;
    let cutoff = (1.0 / m_big as f64).sqrt();
    let mut below = 0u64;
    for _ in 0..draws {
        let a = ensembles::gaussian_matrix(m_big, m_big, 1.0, &mut rng);
        if ensembles::smallest_singular_value_fast(&a) <= cutoff {
            below += 1;
        }
    }
    let freq_small = below as f64 / draws as f64;
    let asym = ensembles::smallest_sv_cdf(1.0);
    rows.push_str(&format!(
        "{},{},{},{}\n",
        full(1.0),
        full(freq_small),
        full(asym - 0.05),
        full(asym + 0.05)
    ));
    println!(
        "smallest-sv-cdf: empirical {freq_small:.3} vs asymptotic {asym:.3} over {draws} draws"
    );
    if (freq_small - asym).abs() > 0.05 {
        ok = false;
        first_failure.get_or_insert(Box::new(Failure {
            property: "smallest-sv-cdf",
            trial: draws,
            detail: format!("frequency {freq_small} vs asymptotic {asym}"),
            pair: None,
        }));
    }

    // Spectral-norm tail of the perturbation at t = 2.
    let norm_draws = trials.clamp(100, 20_000);
    let (threshold, confidence) = ensembles::spectral_norm_tail(0.01, 4, 2.0);
    let mut within = 0u64;
    for _ in 0..norm_draws {
        let delta = ensembles::gaussian_matrix(4, 4, 0.01, &mut rng);
        if bounds::spectral_norm(&delta) <= threshold {
            within += 1;
        }
    }
    let freq_norm = within as f64 / norm_draws as f64;
    rows.push_str(&format!(
        "{},{},{},{}\n",
        full(2.0),
        full(freq_norm),
        full(confidence - 0.02),
        full(1.0)
    ));
    println!(
        "spectral-norm-tail: empirical {freq_norm:.4} >= bound {:.4} over {norm_draws} draws",
        confidence - 0.02
    );
    if freq_norm < confidence - 0.02 {
        ok = false;
        first_failure.get_or_insert(Box::new(Failure {
            property: "spectral-norm-tail",
            trial: norm_draws,
            detail: format!("frequency {freq_norm} below {}", confidence - 0.02),
            pair: None,
        }));
    }

    let path = args.out.join("tail_stats.csv");
    if let Err(e) = write_atomic(&path, rows.as_bytes()) {
        eprintln!("failed to write {}: {e}", path.display());
        return Err(None);
    }
    if ok {
        Ok(())
    } else {
        Err(first_failure)
    }
}
