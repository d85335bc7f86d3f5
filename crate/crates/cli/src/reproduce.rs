//! `rrest reproduce`: generate one ill-conditioned scenario and write the
//! study bundle: spectra table, certificate term splits, certificate
//! report, and closed-form plus Monte Carlo MSE values.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use rrest_core::bounds;
use rrest_core::ensembles::{self, McResult, ScenarioConfig};
use rrest_core::estimators;
use rrest_core::json::{CertificateJson, PairJson, ScenarioJson};
use rrest_core::mse::{self, EstimatorFamily};

use crate::out::{full, write_atomic, RunManifest};
use crate::{ReproduceArgs, EXIT_GENERATION, EXIT_IO, EXIT_OK};

#[derive(Serialize)]
struct McJson {
    estimate: f64,
    stderr: f64,
    n_samples: u64,
}

impl From<McResult> for McJson {
    fn from(r: McResult) -> Self {
        Self {
            estimate: r.estimate,
            stderr: r.stderr,
            n_samples: r.n_samples,
        }
    }
}

#[derive(Serialize)]
struct MseJson {
    epsilon: f64,
    r: usize,
    shared: KindValues,
    generic: KindValues,
    monte_carlo: KindMc,
}

#[derive(Serialize)]
struct KindValues {
    mmse: f64,
    rmmse: f64,
    rsvd: f64,
}

#[derive(Serialize)]
struct KindMc {
    mmse: McJson,
    rmmse: McJson,
    rsvd: McJson,
}

pub fn run(args: &ReproduceArgs) -> u8 {
    let cfg = ScenarioConfig {
        n: args.n,
        m: args.m,
        gamma_min_cap: args.gamma_min_cap,
        cond_min: args.cond_min,
        delta_sd: args.delta_sd,
        kappa: args.kappa,
        max_rejects: args.max_rejects,
        seed: args.seed,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let scenario = match ensembles::generate_scenario(&cfg, &mut rng) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("scenario generation failed: {e}");
            return EXIT_GENERATION;
        }
    };
    let pair = &scenario.pair;
    let r = pair.r();
    let eps = pair.epsilon();
    let sqrt_eps = eps.sqrt();

    let mut manifest = RunManifest::new(
        "reproduce",
        &format!("{cfg:?} mc_samples={}", args.mc_samples),
        args.seed,
    );

    // Scenario (pair schema plus seed and rejection count).
    let scenario_json = ScenarioJson {
        pair: PairJson::from_pair(pair),
        seed: args.seed,
        rejects: scenario.rejects,
    };

    // Spectra in absolute units and in multiples of sqrt(eps).
    let mut table1 = String::from("index,gamma,sigma,gamma_over_sqrt_eps,sigma_over_sqrt_eps\n");
    for i in 0..pair.m() {
        let g = pair.gammas()[i];
        let s = pair.sigmas()[i];
        table1.push_str(&format!(
            "{},{},{},{},{}\n",
            i + 1,
            full(g),
            full(s),
            full(g / sqrt_eps),
            full(s / sqrt_eps)
        ));
    }

    // Certificate bound splits by column block.
    let sep = bounds::separation_from_spectra(pair.gammas(), pair.sigmas(), r, pair.delta_norm());
    let split = bounds::bound_el_ter_split(pair.gammas(), pair.sigmas(), eps, &sep, r);
    let table2 = format!(
        "block,value\nleading,{}\ntrailing,{}\ntotal,{}\n",
        full(split.el_leading),
        full(split.el_trailing),
        full(split.rhs_el())
    );
    let table3 = format!(
        "block,value\nleading,{}\ntrailing,{}\ntotal,{}\n",
        full(split.ter_leading),
        full(split.ter_trailing),
        full(split.rhs_ter())
    );
    let al = bounds::lhs_al_split(pair);
    let table4 = format!(
        "term,value\ncross_block,{}\ntail_block,{}\nepsilon_term,{}\ntotal,{}\nthreshold,{}\n",
        full(al.cross_block),
        full(al.tail_block),
        full(al.eps_term),
        full(al.lhs()),
        full((pair.m() - r) as f64)
    );

    let report = bounds::robustness_certificates(pair);
    let certificate = CertificateJson::from_report(&report);

    // Closed forms and Monte Carlo confirmation.
    let shared = |family| {
        mse::closed_form_shared(family, pair.gammas(), pair.sigmas(), eps, r)
            .expect("valid spectra")
            .total
    };
    let generic = |family| {
        mse::closed_form_generic(pair, family, r)
            .expect("valid pair")
            .total
    };
    let h_pert = pair.h_perturbed();
    let built = [
        estimators::mmse(&h_pert, eps).expect("full-rank perturbed matrix"),
        estimators::r_mmse(&h_pert, eps, r).expect("valid rank"),
        estimators::r_svd(&h_pert, r).expect("valid rank"),
    ];
    let mc: Vec<McResult> = built
        .iter()
        .map(|est| ensembles::monte_carlo_mse(est, pair.base(), args.mc_samples, &mut rng))
        .collect();

    let mse_json = MseJson {
        epsilon: eps,
        r,
        shared: KindValues {
            mmse: shared(EstimatorFamily::Mmse),
            rmmse: shared(EstimatorFamily::RMmse),
            rsvd: shared(EstimatorFamily::RSvd),
        },
        generic: KindValues {
            mmse: generic(EstimatorFamily::Mmse),
            rmmse: generic(EstimatorFamily::RMmse),
            rsvd: generic(EstimatorFamily::RSvd),
        },
        monte_carlo: KindMc {
            mmse: mc[0].into(),
            rmmse: mc[1].into(),
            rsvd: mc[2].into(),
        },
    };

    // The certificate verdict and the closed forms are two routes to the
    // same comparison; a disagreement would mean numerical corruption.
    if report.verdict_al == rrest_core::bounds::VerdictAl::MmseWorse {
        let scale = mse_json.generic.mmse.abs().max(1.0);
        assert!(
            mse_json.generic.mmse >= mse_json.generic.rmmse - 1e-9 * scale,
            "certified verdict contradicts closed-form MSE values"
        );
    }

    let out = &args.out;
    let writes: Vec<(&str, Vec<u8>)> = vec![
        (
            "scenario.json",
            serde_json::to_vec_pretty(&scenario_json).expect("scenario serialization"),
        ),
        ("table1.csv", table1.into_bytes()),
        ("table2.csv", table2.into_bytes()),
        ("table3.csv", table3.into_bytes()),
        ("table4.csv", table4.into_bytes()),
        (
            "certificates.json",
            serde_json::to_vec_pretty(&certificate).expect("certificate serialization"),
        ),
        (
            "mse.json",
            serde_json::to_vec_pretty(&mse_json).expect("mse serialization"),
        ),
    ];
    for (name, bytes) in &writes {
        let path = out.join(name);
        if let Err(e) = write_atomic(&path, bytes) {
            eprintln!("failed to write {}: {e}", path.display());
            return EXIT_IO;
        }
        manifest.record(&path);
    }
    if let Err(e) = manifest.write(out) {
        eprintln!("failed to write manifest: {e}");
        return EXIT_IO;
    }
    if let Err(missing) = check_outputs(out, &manifest) {
        eprintln!("manifest lists missing output: {missing}");
        return EXIT_IO;
    }

    println!(
        "scenario seed {} accepted after {} rejects; verdict {}",
        args.seed, scenario.rejects, certificate.verdict_al
    );
    EXIT_OK
}

fn check_outputs(dir: &Path, manifest: &RunManifest) -> Result<(), String> {
    for name in &manifest.outputs {
        if !dir.join(name).exists() {
            return Err(name.clone());
        }
    }
    Ok(())
}
