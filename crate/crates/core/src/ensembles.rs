//! Gaussian random-matrix instance generation, the analytic tail/pdf
//! formulas for square Gaussian ensembles, and the Monte Carlo MSE oracle.
//!
//! Everything here is a deterministic function of (inputs, seed): random
//! draws always flow through an explicitly seeded counter-based generator
//! (ChaCha), and Monte Carlo fan-out across workers uses fixed per-stream
//! substreams combined in stream order, so results are bit-stable for a
//! given build regardless of thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::estimators::EstimatorMatrix;
use crate::matrix::Matrix;
use crate::model::{LinearModel, ModelError, PerturbedPair};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("gave up after {0} rejected draws")]
    RejectionExhausted(u64),
    #[error("invalid scenario configuration: {0}")]
    BadConfig(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How ill-conditioned scenario matrices are drawn.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub n: usize,
    pub m: usize,
    /// Accept only matrices whose smallest singular value is below this cap.
    pub gamma_min_cap: f64,
    /// Accept only matrices at least this ill-conditioned.
    pub cond_min: f64,
    /// Per-entry standard deviation of the perturbation.
    pub delta_sd: f64,
    /// Separation gap used when classifying the generated pair.
    pub kappa: f64,
    pub max_rejects: u64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    /// The square 4×4 study: smallest singular value under 0.01 (about 1 in
    /// 50 standard-normal draws), condition number at least 1e3, perturbation
    /// entries at sd 0.01.
    fn default() -> Self {
        Self {
            n: 4,
            m: 4,
            gamma_min_cap: 0.01,
            cond_min: 1e3,
            delta_sd: 0.01,
            kappa: 1.75,
            max_rejects: 100_000,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    fn validate(&self) -> Result<(), EnsembleError> {
        if self.n < self.m || self.m < 2 {
            return Err(EnsembleError::BadConfig("need n >= m >= 2"));
        }
        let caps = [self.gamma_min_cap, self.cond_min, self.delta_sd];
        if caps.iter().any(|c| !c.is_finite() || *c <= 0.0) {
            return Err(EnsembleError::BadConfig("caps must be positive"));
        }
        if self.kappa <= 1.0 {
            return Err(EnsembleError::BadConfig("kappa must exceed 1"));
        }
        if self.max_rejects == 0 {
            return Err(EnsembleError::BadConfig("max_rejects must be at least 1"));
        }
        Ok(())
    }
}

/// A generated pair together with how many draws were rejected first.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub pair: PerturbedPair,
    pub rejects: u64,
}

/// n×m matrix of i.i.d. normal(0, sd²) entries, filled in row-major order.
pub fn gaussian_matrix(n: usize, m: usize, sd: f64, rng: &mut impl Rng) -> Matrix {
    let mut a = Matrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let z: f64 = StandardNormal.sample(rng);
            a[(i, j)] = sd * z;
        }
    }
    a
}

/// Asymptotic distribution of the scaled smallest singular value of a
/// square standard Gaussian matrix: `P(m γ_m² ≤ t) ≈ 1 - exp(-t/2 - √t)`
/// (the vanishing correction term is dropped).
pub fn smallest_sv_cdf(t: f64) -> f64 {
    assert!(t >= 0.0, "cdf argument must be nonnegative");
    1.0 - (-t / 2.0 - t.sqrt()).exp()
}

/// Universal bracket for the condition-number tail of a square standard
/// Gaussian matrix: `0.13/t < P(cond > m t) < 5.60/t`, clamped to [0, 1].
pub fn condition_tail_bounds(t: f64) -> (f64, f64) {
    assert!(t > 0.0, "tail parameter must be positive");
    ((0.13 / t).clamp(0.0, 1.0), (5.60 / t).clamp(0.0, 1.0))
}

/// Joint density (up to normalization) of the singular values of a square
/// standard Gaussian matrix: `exp(-½ Σ γ_k²) Π_{i<j} |γ_j² - γ_i²|`.
/// Vanishes whenever two arguments coincide, and is symmetric under
/// permutation of its arguments.
pub fn singular_pdf_unnormalized(gammas: &[f64]) -> f64 {
    debug_assert!(gammas.iter().all(|&g| g >= 0.0));
    let energy: f64 = gammas.iter().map(|&g| g * g).sum();
    let mut vandermonde = 1.0;
    for i in 0..gammas.len() {
        for j in (i + 1)..gammas.len() {
            vandermonde *= (gammas[j] * gammas[j] - gammas[i] * gammas[i]).abs();
        }
    }
    (-0.5 * energy).exp() * vandermonde
}

/// Spectral-norm tail bound for a square matrix with i.i.d. normal(0, sd²)
/// entries: `P(||ΔH||₂ ≤ sd (2√m + t)) ≥ 1 - 2 exp(-t²/2)`. Returns the
/// threshold and the confidence (clamped to zero where vacuous).
pub fn spectral_norm_tail(sd: f64, m: usize, t: f64) -> (f64, f64) {
    assert!(sd > 0.0 && t >= 0.0);
    let threshold = sd * (2.0 * (m as f64).sqrt() + t);
    let confidence = (1.0 - 2.0 * (-t * t / 2.0).exp()).max(0.0);
    (threshold, confidence)
}

/// Rejection-samples a standard-normal matrix until it is ill conditioned
/// per the config, perturbs it, sets the noise power to the squared
/// smallest perturbed singular value, and assembles the pair at rank
/// `r = m - 1`.
///
/// Generation never consults the classifier; downstream code decides what
/// to do with pairs that fail classification (in this regime the
/// overwhelming majority passes).
pub fn generate_scenario(
    cfg: &ScenarioConfig,
    rng: &mut impl Rng,
) -> Result<Scenario, EnsembleError> {
    cfg.validate()?;
    let mut rejects = 0u64;
    loop {
        if rejects >= cfg.max_rejects {
            return Err(EnsembleError::RejectionExhausted(rejects));
        }
        let h = gaussian_matrix(cfg.n, cfg.m, 1.0, rng);
        let Some(svals) = crate::model::jacobi::singular_values(&h) else {
            rejects += 1;
            continue;
        };
        let gamma_min = svals[svals.len() - 1];
        let cond = svals[0] / gamma_min;
        if gamma_min >= cfg.gamma_min_cap || cond < cfg.cond_min {
            rejects += 1;
            continue;
        }
        let delta = gaussian_matrix(cfg.n, cfg.m, cfg.delta_sd, rng);
        let Some(pert_svals) = crate::model::jacobi::singular_values(&(&h + &delta)) else {
            rejects += 1;
            continue;
        };
        let sigma_min = pert_svals[pert_svals.len() - 1];
        let epsilon = sigma_min * sigma_min;
        let Ok(base) = LinearModel::new(h, epsilon) else {
            rejects += 1;
            continue;
        };
        match PerturbedPair::new(base, delta, cfg.m - 1, cfg.kappa) {
            Ok(pair) => return Ok(Scenario { pair, rejects }),
            Err(_) => {
                rejects += 1;
                continue;
            }
        }
    }
}

/// Draws a random pair guaranteed (by construction) to satisfy the
/// separated ill-conditioned classification: leading singular values above
/// `kappa sqrt(eps)` with wide gaps, trailing ones below `sqrt(eps)`, and a
/// perturbation small enough to keep every interval disjoint.
pub fn sample_separated_pair(rng: &mut impl Rng, n: usize, m: usize, r: usize) -> PerturbedPair {
    assert!(n >= m && m >= 2 && r >= 1 && r < m);
    loop {
        let kappa: f64 = 10f64.powf(rng.random_range(2f64.log10()..2.0));
        let epsilon = 10f64.powf(rng.random_range(-6.0..-1.0));
        let sqrt_eps = epsilon.sqrt();

        // Leading spectrum, built upward from gamma_r > kappa sqrt(eps).
        let mut gammas = vec![0.0f64; m];
        gammas[r - 1] = kappa * sqrt_eps * rng.random_range(1.5..3.0);
        for i in (0..r.saturating_sub(1)).rev() {
            gammas[i] = gammas[i + 1] * rng.random_range(1.4..4.0);
        }
        // Trailing spectrum, strictly below sqrt(eps).
        gammas[r] = sqrt_eps * rng.random_range(0.05..0.5);
        for i in (r + 1)..m {
            gammas[i] = gammas[i - 1] * rng.random_range(0.05..0.6);
        }

        let left = random_orthogonal(rng, n);
        let right = random_orthogonal(rng, m);
        let mut h = Matrix::zeros(n, m);
        for (j, &g) in gammas.iter().enumerate() {
            h.set_column(j, &(left.column(j) * g));
        }
        let h = h * right.transpose();

        // Perturbation budget keeping all three classification conditions.
        let min_gap = gammas
            .windows(2)
            .take(r)
            .map(|w| w[0] - w[1])
            .fold(f64::INFINITY, f64::min);
        let budget = (0.2 * min_gap)
            .min(0.9 * (gammas[r - 1] - kappa * sqrt_eps))
            .min(0.9 * (sqrt_eps - gammas[r]) / std::f64::consts::SQRT_2);
        let norm = 0.9 * budget;

        let direction = gaussian_matrix(n, m, 1.0, rng);
        let delta = &direction * (norm / crate::bounds::spectral_norm(&direction));

        let Ok(base) = LinearModel::new(h, epsilon) else {
            continue;
        };
        let Ok(pair) = PerturbedPair::new(base, delta, r, kappa) else {
            continue;
        };
        if pair.classify().is_satisfied() {
            return pair;
        }
    }
}

/// Random moderate-SNR pair for closed-form/oracle cross-checks: Gaussian
/// base matrix, noise power in [3e-2, 1], perturbation at 0.1%..5% of the
/// base spectral norm. Keeps every MSE value well away from zero so that
/// relative comparisons at 1e-10 are meaningful.
pub fn sample_generic_pair(rng: &mut impl Rng, n: usize, m: usize) -> PerturbedPair {
    assert!(n >= m && m >= 2);
    loop {
        let h = gaussian_matrix(n, m, 1.0, rng);
        let epsilon = 10f64.powf(rng.random_range(-1.5..0.0));
        let scale = 10f64.powf(rng.random_range(-3.0..-1.3));
        let direction = gaussian_matrix(n, m, 1.0, rng);
        let h_norm = crate::bounds::spectral_norm(&h);
        let delta = &direction * (scale * h_norm / crate::bounds::spectral_norm(&direction));
        let r = rng.random_range(1..m);
        let Ok(base) = LinearModel::new(h, epsilon) else {
            continue;
        };
        if let Ok(pair) = PerturbedPair::new(base, delta, r, 1.5) {
            return pair;
        }
    }
}

/// Random pair whose base and perturbed matrices share singular vectors:
/// the perturbation only moves the singular values. The alignment matrices
/// of such a pair are identities (up to sign canonicalization).
pub fn sample_shared_vector_pair(rng: &mut impl Rng, n: usize, m: usize) -> PerturbedPair {
    assert!(n >= m && m >= 2);
    loop {
        let h = gaussian_matrix(n, m, 1.0, rng);
        let Ok(svd) = crate::model::decompose(&h) else {
            continue;
        };
        // Scale each singular value by a factor close to one, preserving
        // strict ordering.
        let mut delta = Matrix::zeros(n, m);
        let mut sigmas = Vec::with_capacity(m);
        for (j, &g) in svd.singulars.iter().enumerate() {
            let s = g * rng.random_range(0.95..1.05);
            sigmas.push(s);
            delta += svd.left.column(j) * svd.right.column(j).transpose() * (s - g);
        }
        if sigmas.windows(2).any(|w| w[0] <= w[1] * (1.0 + 1e-6)) {
            continue;
        }
        let epsilon = 10f64.powf(rng.random_range(-1.5..0.0));
        let r = rng.random_range(1..m);
        let Ok(base) = LinearModel::new(h, epsilon) else {
            continue;
        };
        if let Ok(pair) = PerturbedPair::new(base, delta, r, 1.5) {
            return pair;
        }
    }
}

/// Smallest singular value through the bidiagonalization path. Accurate to
/// roughly 1e-8 of the matrix norm (not to full relative precision), which
/// is orders of magnitude below the statistical tolerances of the tail
/// studies this serves; it is the only practical option at sizes like
/// 200×200 times thousands of samples.
pub fn smallest_singular_value_fast(a: &Matrix) -> f64 {
    let svals = a.clone().singular_values();
    svals[svals.len() - 1]
}

/// Condition number (largest over smallest singular value), exact path.
pub fn condition_number(a: &Matrix) -> f64 {
    let svals = crate::model::jacobi::singular_values(a).expect("condition number svd");
    svals[0] / svals[svals.len() - 1]
}

/// Haar-ish random orthogonal matrix: QR of a Gaussian draw with the sign
/// of each R diagonal folded into Q.
pub fn random_orthogonal(rng: &mut impl Rng, size: usize) -> Matrix {
    let g = gaussian_matrix(size, size, 1.0, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..size {
        if r[(j, j)] < 0.0 {
            q.set_column(j, &(-q.column(j)).clone_owned());
        }
    }
    q
}

/// Monte Carlo estimate of an estimator's MSE against the true model.
#[derive(Debug, Clone, Copy)]
pub struct McResult {
    pub estimate: f64,
    pub stderr: f64,
    pub n_samples: u64,
}

/// Samples per logical substream; the stream layout (not the thread count)
/// fixes the result.
const MC_STREAM_LEN: u64 = 1 << 16;

/// Draws `x ~ N(0, I_m)`, `n ~ N(0, I_n)`, forms `y = Hx + sqrt(eps) n`,
/// and averages `||Wy - x||²`. Returns the mean and the standard error of
/// the per-sample squared error.
///
/// Work is sharded over fixed-size ChaCha substreams keyed off a seed drawn
/// from `rng`; shards may be executed by any number of worker threads
/// (capped by `RREST_THREADS`) without changing the result.
pub fn monte_carlo_mse(
    est: &EstimatorMatrix,
    truth: &LinearModel,
    n_samples: u64,
    rng: &mut impl Rng,
) -> McResult {
    assert!(
        n_samples >= 2,
        "need at least two samples for a standard error"
    );
    assert_eq!(
        est.w.ncols(),
        truth.n(),
        "estimator/model dimension mismatch"
    );
    assert_eq!(
        est.w.nrows(),
        truth.m(),
        "estimator/model dimension mismatch"
    );

    let base_seed = rng.next_u64();
    let n_streams = n_samples.div_ceil(MC_STREAM_LEN);
    let workers = worker_count(n_streams);

    let run_stream = |stream: u64| -> (f64, f64) {
        let lo = stream * MC_STREAM_LEN;
        let hi = (lo + MC_STREAM_LEN).min(n_samples);
        let mut stream_rng = ChaCha8Rng::seed_from_u64(base_seed);
        stream_rng.set_stream(stream + 1);
        sample_squared_errors(est, truth, hi - lo, &mut stream_rng)
    };

    let mut partials: Vec<(f64, f64)> = vec![(0.0, 0.0); n_streams as usize];
    if workers <= 1 || n_streams == 1 {
        for (s, slot) in partials.iter_mut().enumerate() {
            *slot = run_stream(s as u64);
        }
    } else {
        let next = std::sync::atomic::AtomicU64::new(0);
        let collected: Vec<Vec<(u64, (f64, f64))>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    scope.spawn(|| {
                        let mut local = Vec::new();
                        loop {
                            let s = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                            if s >= n_streams {
                                break;
                            }
                            local.push((s, run_stream(s)));
                        }
                        local
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for chunk in collected {
            for (s, partial) in chunk {
                partials[s as usize] = partial;
            }
        }
    }

    // Combine in stream order with compensated summation.
    let mut sum = 0.0f64;
    let mut sum_c = 0.0f64;
    let mut sum_sq = 0.0f64;
    let mut sum_sq_c = 0.0f64;
    for (s1, s2) in partials {
        kahan_add(&mut sum, &mut sum_c, s1);
        kahan_add(&mut sum_sq, &mut sum_sq_c, s2);
    }

    let count = n_samples as f64;
    let mean = sum / count;
    let variance = ((sum_sq - count * mean * mean) / (count - 1.0)).max(0.0);
    McResult {
        estimate: mean,
        stderr: (variance / count).sqrt(),
        n_samples,
    }
}

fn kahan_add(sum: &mut f64, comp: &mut f64, value: f64) {
    let y = value - *comp;
    let t = *sum + y;
    *comp = (t - *sum) - y;
    *sum = t;
}

fn sample_squared_errors(
    est: &EstimatorMatrix,
    truth: &LinearModel,
    count: u64,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let h = truth.h();
    let w = &est.w;
    let (n, m) = (truth.n(), truth.m());
    let sqrt_eps = truth.epsilon().sqrt();

    let mut x = vec![0.0f64; m];
    let mut y = vec![0.0f64; n];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..count {
        for xi in x.iter_mut() {
            *xi = StandardNormal.sample(rng);
        }
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, &xj) in x.iter().enumerate() {
                acc += h[(i, j)] * xj;
            }
            let noise: f64 = StandardNormal.sample(rng);
            *yi = acc + sqrt_eps * noise;
        }
        let mut err = 0.0;
        for i in 0..m {
            let mut acc = 0.0;
            for (j, &yj) in y.iter().enumerate() {
                acc += w[(i, j)] * yj;
            }
            let d = acc - x[i];
            err += d * d;
        }
        sum += err;
        sum_sq += err * err;
    }
    (sum, sum_sq)
}

fn worker_count(n_streams: u64) -> u64 {
    let hw = std::thread::available_parallelism()
        .map(|p| p.get() as u64)
        .unwrap_or(1);
    let cap = std::env::var("RREST_THREADS")
        .ok()
        .and_then(|v| v.parse::<u64>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or(hw);
    cap.min(hw).min(n_streams).max(1)
}
