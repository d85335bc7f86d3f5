//! `rrest certify`: read a pair from JSON, evaluate the robustness
//! certificates, and encode the verdict in the exit code.

use rrest_core::bounds::{self, VerdictAl};
use rrest_core::json::{CertificateJson, PairJson};

use crate::out::{write_atomic, RunManifest};
use crate::{CertifyArgs, EXIT_INCONCLUSIVE, EXIT_IO, EXIT_OK, EXIT_PARSE, EXIT_RHO_GATE};

pub fn run(args: &CertifyArgs) -> u8 {
    let raw = match std::fs::read_to_string(&args.pair) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("cannot read {}: {e}", args.pair.display());
            return EXIT_IO;
        }
    };
    let pair = match serde_json::from_str::<PairJson>(&raw).map_err(|e| e.to_string()) {
        Ok(dto) => match dto.to_pair() {
            Ok(p) => p,
            Err(e) => {
                eprintln!("invalid pair: {e}");
                return EXIT_PARSE;
            }
        },
        Err(e) => {
            eprintln!("malformed pair JSON: {e}");
            return EXIT_PARSE;
        }
    };

    let report = bounds::robustness_certificates(&pair);
    let body = serde_json::to_string_pretty(&CertificateJson::from_report(&report))
        .expect("certificate serialization");

    let path = args.out.join("certificate.json");
    if let Err(e) = write_atomic(&path, body.as_bytes()) {
        eprintln!("failed to write {}: {e}", path.display());
        return EXIT_IO;
    }
    let mut manifest = RunManifest::new("certify", &args.pair.display().to_string(), 0);
    manifest.record(&path);
    if let Err(e) = manifest.write(&args.out) {
        eprintln!("failed to write manifest: {e}");
        return EXIT_IO;
    }

    match report.verdict_al {
        VerdictAl::MmseWorse => {
            println!(
                "verdict: mmse-worse (lhs {} >= {})",
                report.lhs_al, report.threshold_al
            );
            EXIT_OK
        }
        VerdictAl::Inconclusive => {
            println!(
                "verdict: inconclusive (lhs {} < {})",
                report.lhs_al, report.threshold_al
            );
            EXIT_INCONCLUSIVE
        }
        VerdictAl::RhoGateFailed => {
            println!(
                "verdict: rho-gate-failed (min rho {})",
                report.separation.min_rho()
            );
            EXIT_RHO_GATE
        }
    }
}
