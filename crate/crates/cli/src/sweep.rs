//! `rrest sweep`: evaluate the noise-free gain/loss terms over an
//! `(a_gamma, a_sigma)` grid and trace the positivity boundary of the
//! chosen term for figure overlays.

use rrest_core::mse::parametrized_terms;

use crate::out::{full, write_atomic, RunManifest};
use crate::{GridAxis, SweepArgs, TermChoice, EXIT_IO, EXIT_OK};

fn axis_points(axis: &GridAxis) -> Vec<f64> {
    let step = (axis.max - axis.min) / (axis.steps - 1) as f64;
    (0..axis.steps)
        .map(|k| axis.min + step * k as f64)
        .collect()
}

pub fn run(args: &SweepArgs) -> u8 {
    let gamma_axis = args.grid[0];
    let sigma_axis = *args.grid.get(1).unwrap_or(&args.grid[0]);
    let gammas = axis_points(&gamma_axis);
    let sigmas = axis_points(&sigma_axis);

    // Row-major grid: outer loop over a_gamma, inner over a_sigma.
    let mut values = vec![0.0f64; gammas.len() * sigmas.len()];
    let mut csv = String::from("a_gamma,a_sigma,a_value,b_value\n");
    for (gi, &g) in gammas.iter().enumerate() {
        for (si, &s) in sigmas.iter().enumerate() {
            let (a, b) = parametrized_terms(g, s);
            values[gi * sigmas.len() + si] = match args.term {
                TermChoice::A => a,
                TermChoice::B => b,
            };
            csv.push_str(&format!(
                "{},{},{},{}\n",
                full(g),
                full(s),
                full(a),
                full(b)
            ));
        }
    }

    // Sign-change contour by linear interpolation along both grid
    // directions.
    let mut boundary = String::from("a_gamma,a_sigma\n");
    let value = |gi: usize, si: usize| values[gi * sigmas.len() + si];
    for gi in 0..gammas.len() {
        for si in 0..sigmas.len() {
            if si + 1 < sigmas.len() {
                let (v0, v1) = (value(gi, si), value(gi, si + 1));
                if v0 == 0.0 || v0.signum() != v1.signum() {
                    let t = v0 / (v0 - v1);
                    let s = sigmas[si] + t * (sigmas[si + 1] - sigmas[si]);
                    boundary.push_str(&format!("{},{}\n", full(gammas[gi]), full(s)));
                }
            }
            if gi + 1 < gammas.len() {
                let (v0, v1) = (value(gi, si), value(gi + 1, si));
                if v0.signum() != v1.signum() {
                    let t = v0 / (v0 - v1);
                    let g = gammas[gi] + t * (gammas[gi + 1] - gammas[gi]);
                    boundary.push_str(&format!("{},{}\n", full(g), full(sigmas[si])));
                }
            }
        }
    }

    let mut manifest = RunManifest::new(
        "sweep",
        &format!(
            "term={} gamma={gamma_axis:?} sigma={sigma_axis:?}",
            match args.term {
                TermChoice::A => "A",
                TermChoice::B => "B",
            }
        ),
        0,
    );
    for (name, body) in [("sweep.csv", csv), ("boundary.csv", boundary)] {
        let path = args.out.join(name);
        if let Err(e) = write_atomic(&path, body.as_bytes()) {
            eprintln!("failed to write {}: {e}", path.display());
            return EXIT_IO;
        }
        manifest.record(&path);
    }
    if let Err(e) = manifest.write(&args.out) {
        eprintln!("failed to write manifest: {e}");
        return EXIT_IO;
    }
    println!("swept {} x {} grid", gamma_axis.steps, sigma_axis.steps);
    EXIT_OK
}
