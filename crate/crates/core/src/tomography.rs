//! Simulated state and process tomography.
//!
//! Measurements are complete orthonormal bases ("settings"). Each setting is
//! sampled with multinomial shot noise from a seeded ChaCha stream keyed by
//! the setting index, so results depend only on (inputs, seed).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{choi, process_fidelity, Channel, ChoiMatrix};
use crate::error::{Error, Result};
use crate::linalg::{basis, c, hermitian_eig, re, ComplexMatrix, C64};
use crate::states::{von_neumann_entropy, DensityMatrix, PureState};

const PROB_FLOOR: f64 = 1e-300;

/// Informationally complete family of projective measurement settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectorSet {
    dim: usize,
    /// settings[s][o] is the unit vector for outcome o of setting s.
    settings: Vec<Vec<Vec<C64>>>,
    /// (setting, outcome) of each of the d² probe directions.
    probes: Vec<(usize, usize)>,
}

/// Computational basis plus, for every pair j < k, the bases containing
/// (|j⟩ ± |k⟩)/√2 and (|j⟩ ± i|k⟩)/√2 (completed with the remaining |l⟩).
pub fn ic_projectors(d: usize) -> Result<ProjectorSet> {
    if !(2..=8).contains(&d) {
        return Err(Error::out_of_range("d", d as f64, "[2, 8]"));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut settings = vec![(0..d).map(|j| basis(d, j)).collect::<Vec<_>>()];
    let mut probes: Vec<(usize, usize)> = (0..d).map(|j| (0, j)).collect();
    for j in 0..d {
        for k in (j + 1)..d {
            for phase in [re(1.0), c(0.0, 1.0)] {
                let mut plus = vec![re(0.0); d];
                plus[j] = re(h);
                plus[k] = phase * h;
                let mut minus = vec![re(0.0); d];
                minus[j] = re(h);
                minus[k] = -phase * h;
                let mut setting = vec![plus, minus];
                setting.extend((0..d).filter(|&l| l != j && l != k).map(|l| basis(d, l)));
                probes.push((settings.len(), 0));
                settings.push(setting);
            }
        }
    }
    Ok(ProjectorSet {
        dim: d,
        settings,
        probes,
    })
}

impl ProjectorSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn settings(&self) -> &[Vec<Vec<C64>>] {
        &self.settings
    }

    pub fn num_settings(&self) -> usize {
        self.settings.len()
    }

    pub fn num_projectors(&self) -> usize {
        self.settings.iter().map(Vec::len).sum()
    }

    /// The d² distinct probe states.
    pub fn probe_states(&self) -> Vec<PureState> {
        self.probes
            .iter()
            .map(|&(s, o)| {
                PureState::new(self.settings[s][o].clone(), vec![self.dim])
                    .expect("projector vectors are normalized")
            })
            .collect()
    }

    /// Rank of the Gram matrix Tr(Πᵢ Πⱼ) over all projectors.
    pub fn gram_rank(&self) -> Result<usize> {
        let vecs: Vec<&Vec<C64>> = self.settings.iter().flatten().collect();
        let n = vecs.len();
        let gram = ComplexMatrix::from_fn(n, n, |i, j| {
            let ov: C64 = vecs[i].iter().zip(vecs[j]).map(|(a, b)| a.conj() * b).sum();
            re(ov.norm_sqr())
        });
        let vals = hermitian_eig(&gram)?.values;
        let tol = 1e-9 * vals[0].abs().max(1.0);
        Ok(vals.iter().filter(|&&l| l > tol).count())
    }

    /// Largest deviation of Σ_o Π_o from the identity over all settings.
    pub fn completeness_defect(&self) -> f64 {
        self.settings
            .iter()
            .map(|s| {
                let mut sum = ComplexMatrix::zeros(self.dim, self.dim);
                for v in s {
                    sum = &sum + &ComplexMatrix::outer(v, v);
                }
                sum.max_abs_diff(&ComplexMatrix::identity(self.dim))
            })
            .fold(0.0, f64::max)
    }

    /// Born probabilities per setting, clipped at zero and renormalized.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Result<Vec<Vec<f64>>> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho.dim(),
            });
        }
        self.settings
            .iter()
            .map(|s| {
                let raw: Vec<f64> = s
                    .iter()
                    .map(|v| rho.matrix().expectation(v).re.max(0.0))
                    .collect();
                let total: f64 = raw.iter().sum();
                if (total - 1.0).abs() > 1e-6 {
                    return Err(Error::Invalid(format!(
                        "setting probabilities sum to {total}"
                    )));
                }
                Ok(raw.into_iter().map(|p| p / total).collect())
            })
            .collect()
    }
}

/// Counts for one measurement setting, with the projectors that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingCounts {
    /// Projector vectors as [re, im] amplitude pairs.
    pub projectors: Vec<Vec<[f64; 2]>>,
    pub counts: Vec<u64>,
}

/// Simulated detector counts; serializes as
/// `{dim, settings: [{projectors, counts}], shots, seed}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub dim: usize,
    pub settings: Vec<SettingCounts>,
    /// Shots per setting.
    pub shots: u64,
    pub seed: u64,
}

impl CountRecord {
    fn from_counts(ps: &ProjectorSet, counts: Vec<Vec<u64>>, shots: u64, seed: u64) -> Self {
        let settings = ps
            .settings
            .iter()
            .zip(counts)
            .map(|(s, counts)| SettingCounts {
                projectors: s
                    .iter()
                    .map(|v| v.iter().map(|z| [z.re, z.im]).collect())
                    .collect(),
                counts,
            })
            .collect();
        CountRecord {
            dim: ps.dim,
            settings,
            shots,
            seed,
        }
    }

    pub fn counts(&self) -> impl Iterator<Item = &[u64]> {
        self.settings.iter().map(|s| s.counts.as_slice())
    }

    fn check_against(&self, ps: &ProjectorSet) -> Result<()> {
        if self.dim != ps.dim || self.settings.len() != ps.settings.len() {
            return Err(Error::Invalid(
                "count record does not match projector set".into(),
            ));
        }
        for (rec, set) in self.settings.iter().zip(&ps.settings) {
            if rec.counts.len() != set.len() {
                return Err(Error::Invalid(
                    "count record does not match projector set".into(),
                ));
            }
            if rec.counts.iter().sum::<u64>() != self.shots {
                return Err(Error::Invalid(format!(
                    "setting counts sum to {}, expected {}",
                    rec.counts.iter().sum::<u64>(),
                    self.shots
                )));
            }
        }
        Ok(())
    }
}

fn setting_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn multinomial(rng: &mut ChaCha8Rng, shots: u64, probs: &[f64]) -> Vec<u64> {
    let mut left = shots;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(probs.len());
    for (i, &p) in probs.iter().enumerate() {
        if i == probs.len() - 1 {
            out.push(left);
            break;
        }
        let k = if left == 0 || p <= 0.0 {
            0
        } else if p >= mass {
            left
        } else {
            Binomial::new(left, (p / mass).clamp(0.0, 1.0))
                .expect("valid binomial parameters")
                .sample(rng)
        };
        out.push(k);
        left -= k;
        mass -= p;
    }
    out
}

/// Multinomial shot noise on every setting.
pub fn simulate_counts(
    rho: &DensityMatrix,
    ps: &ProjectorSet,
    shots: u64,
    seed: u64,
) -> Result<CountRecord> {
    if shots == 0 {
        return Err(Error::Invalid("shots must be at least 1".into()));
    }
    let probs = ps.probabilities(rho)?;
    let counts = probs
        .iter()
        .enumerate()
        .map(|(s, p)| multinomial(&mut setting_rng(seed, s as u64), shots, p))
        .collect();
    Ok(CountRecord::from_counts(ps, counts, shots, seed))
}

/// Noise-free counts: probabilities scaled by `shots` and rounded with the
/// largest-remainder rule so every setting sums to `shots`.
pub fn exact_counts(rho: &DensityMatrix, ps: &ProjectorSet, shots: u64) -> Result<CountRecord> {
    let probs = ps.probabilities(rho)?;
    let counts = probs
        .iter()
        .map(|p| {
            let scaled: Vec<f64> = p.iter().map(|x| x * shots as f64).collect();
            let mut base: Vec<u64> = scaled.iter().map(|x| x.floor() as u64).collect();
            let mut short = shots - base.iter().sum::<u64>().min(shots);
            let mut order: Vec<usize> = (0..p.len()).collect();
            order.sort_by(|&a, &b| {
                let ra = scaled[a] - scaled[a].floor();
                let rb = scaled[b] - scaled[b].floor();
                rb.total_cmp(&ra)
            });
            for &i in &order {
                if short == 0 {
                    break;
                }
                base[i] += 1;
                short -= 1;
            }
            base
        })
        .collect();
    Ok(CountRecord::from_counts(ps, counts, shots, 0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MleOptions {
    pub max_iter: usize,
    /// Stop when the log-likelihood gain of an iteration falls below this.
    pub tol: f64,
    /// Mixing weight of the RρR update.
    pub dilution: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            max_iter: 5000,
            tol: 1e-10,
            dilution: 0.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub rho_hat: DensityMatrix,
    /// Σ f log p with f the per-setting observed frequencies.
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Smallest per-iteration likelihood gain (≥ 0 when monotone).
    pub min_gain: f64,
    /// Monte Carlo standard deviation of S(rho_hat); zero until filled in by
    /// [`monte_carlo_errors`].
    pub mc_std_entropy: f64,
}

struct Observations {
    vecs: Vec<Vec<C64>>,
    freqs: Vec<f64>,
}

impl Observations {
    fn new(counts: &CountRecord, ps: &ProjectorSet) -> Self {
        let mut vecs = Vec::new();
        let mut freqs = Vec::new();
        for (rec, set) in counts.settings.iter().zip(&ps.settings) {
            for (n, v) in rec.counts.iter().zip(set) {
                if *n > 0 {
                    vecs.push(v.clone());
                    freqs.push(*n as f64 / counts.shots as f64);
                }
            }
        }
        Observations { vecs, freqs }
    }

    fn probs(&self, rho: &ComplexMatrix) -> Vec<f64> {
        self.vecs
            .iter()
            .map(|v| rho.expectation(v).re.max(PROB_FLOOR))
            .collect()
    }

    fn log_likelihood(&self, probs: &[f64]) -> f64 {
        self.freqs
            .iter()
            .zip(probs)
            .map(|(f, p)| f * p.ln())
            .sum()
    }
}

/// Maximum-likelihood reconstruction by the diluted RρR iteration
/// ρ ← (1−α)ρ + α RρR / Tr(RρR), R = Σ (fᵢ / pᵢ) Πᵢ, starting from I/d.
///
/// If a step would lower the likelihood, α is halved for that step until it
/// does not; the likelihood sequence is therefore non-decreasing.
pub fn mle_reconstruct(
    counts: &CountRecord,
    ps: &ProjectorSet,
    opts: &MleOptions,
) -> Result<ReconstructionResult> {
    counts.check_against(ps)?;
    let d = ps.dim;
    let obs = Observations::new(counts, ps);
    let mut rho = ComplexMatrix::identity(d).scale_real(1.0 / d as f64);
    let mut probs = obs.probs(&rho);
    let mut ll = obs.log_likelihood(&probs);
    let mut min_gain = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let mut r = ComplexMatrix::zeros(d, d);
        for ((v, f), p) in obs.vecs.iter().zip(&obs.freqs).zip(&probs) {
            let w = f / p;
            for i in 0..d {
                let vi = v[i] * w;
                for j in 0..d {
                    r[(i, j)] += vi * v[j].conj();
                }
            }
        }
        let rrr = r.sandwich(&rho).hermitian_part();
        let target = rrr.scale_real(1.0 / rrr.trace().re);

        let mut alpha = opts.dilution;
        let mut accepted = None;
        for _ in 0..30 {
            let cand = (&rho.scale_real(1.0 - alpha) + &target.scale_real(alpha)).hermitian_part();
            let cp = obs.probs(&cand);
            let cll = obs.log_likelihood(&cp);
            if cll >= ll {
                accepted = Some((cand, cp, cll));
                break;
            }
            alpha *= 0.5;
        }
        let Some((cand, cp, cll)) = accepted else {
            converged = true;
            min_gain = min_gain.min(0.0);
            break;
        };
        let gain = cll - ll;
        min_gain = min_gain.min(gain);
        rho = cand;
        probs = cp;
        ll = cll;
        if gain < opts.tol {
            converged = true;
            break;
        }
    }

    let rho_hat = DensityMatrix::project(&rho, vec![d])?;
    let log_likelihood = obs.log_likelihood(&obs.probs(rho_hat.matrix()));
    Ok(ReconstructionResult {
        rho_hat,
        log_likelihood,
        iterations,
        converged,
        min_gain: if min_gain.is_finite() { min_gain } else { 0.0 },
        mc_std_entropy: 0.0,
    })
}

/// Least-squares linear inversion of per-setting probabilities (no positivity
/// constraint).
pub fn linear_inversion(probs: &[Vec<f64>], ps: &ProjectorSet) -> Result<ComplexMatrix> {
    let d = ps.dim;
    if probs.len() != ps.settings.len() {
        return Err(Error::DimensionMismatch {
            expected: ps.settings.len(),
            found: probs.len(),
        });
    }
    let herm = hermitian_basis(d);
    let vecs: Vec<&Vec<C64>> = ps.settings.iter().flatten().collect();
    let p: Vec<f64> = probs.iter().flatten().copied().collect();
    if p.len() != vecs.len() {
        return Err(Error::DimensionMismatch {
            expected: vecs.len(),
            found: p.len(),
        });
    }
    let m = herm.len();
    // Design matrix A[i][k] = ⟨vᵢ|B_k|vᵢ⟩, real for Hermitian B_k.
    let a: Vec<Vec<f64>> = vecs
        .iter()
        .map(|v| herm.iter().map(|b| b.expectation(v).re).collect())
        .collect();
    let ata = ComplexMatrix::from_fn(m, m, |k, l| re(a.iter().map(|row| row[k] * row[l]).sum()));
    let atp: Vec<f64> = (0..m)
        .map(|k| a.iter().zip(&p).map(|(row, pi)| row[k] * pi).sum())
        .collect();
    let x = solve_symmetric(&ata, &atp)?;
    let mut rho = ComplexMatrix::zeros(d, d);
    for (b, xk) in herm.iter().zip(&x) {
        rho = &rho + &b.scale_real(*xk);
    }
    Ok(rho)
}

/// Orthonormal Hermitian basis: E_jj, (E_jk + E_kj)/√2, i(E_jk − E_kj)/√2.
fn hermitian_basis(d: usize) -> Vec<ComplexMatrix> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for j in 0..d {
        let mut e = ComplexMatrix::zeros(d, d);
        e[(j, j)] = re(1.0);
        out.push(e);
    }
    for j in 0..d {
        for k in (j + 1)..d {
            let mut x = ComplexMatrix::zeros(d, d);
            x[(j, k)] = re(h);
            x[(k, j)] = re(h);
            out.push(x);
            let mut y = ComplexMatrix::zeros(d, d);
            y[(j, k)] = c(0.0, h);
            y[(k, j)] = c(0.0, -h);
            out.push(y);
        }
    }
    out
}

const MAX_CONDITION: f64 = 1e8;

/// Solves a real symmetric positive-definite system through its
/// eigendecomposition, rejecting condition numbers above 1e8.
fn solve_symmetric(a: &ComplexMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let eig = hermitian_eig(a)?;
    let max = eig.values[0];
    let min = *eig.values.last().unwrap();
    if !(min > 0.0) || max / min > MAX_CONDITION {
        return Err(Error::IllConditioned(if min > 0.0 { max / min } else { f64::INFINITY }));
    }
    let n = b.len();
    let mut x = vec![0.0; n];
    for k in 0..n {
        let v = eig.vector(k);
        let proj: f64 = v.iter().zip(b).map(|(vi, bi)| vi.re * bi).sum::<f64>() / eig.values[k];
        for i in 0..n {
            x[i] += v[i].re * proj;
        }
    }
    Ok(x)
}

#[derive(Clone, Debug)]
pub struct MonteCarloOptions {
    pub seed: u64,
    /// When false every "resample" reuses the observed counts unchanged.
    pub resample: bool,
    pub mle: MleOptions,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        MonteCarloOptions {
            seed: 0,
            resample: true,
            mle: MleOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

fn resample_record(counts: &CountRecord, seed: u64, stream_base: u64) -> CountRecord {
    let mut out = counts.clone();
    for (s, rec) in out.settings.iter_mut().enumerate() {
        let total = counts.shots as f64;
        let probs: Vec<f64> = rec.counts.iter().map(|&n| n as f64 / total).collect();
        let mut rng = setting_rng(seed, stream_base + s as u64);
        rec.counts = multinomial(&mut rng, counts.shots, &probs);
    }
    out
}

impl MonteCarloSummary {
    /// Mean and sample standard deviation (n − 1 denominator).
    pub fn from_values(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        MonteCarloSummary {
            mean,
            std: var.sqrt(),
            values,
        }
    }
}

/// Reconstructions of one or more states over Monte Carlo resamples. Each
/// resample redraws every record multinomially around its observed
/// frequencies and reruns the reconstruction; `result[r][i]` belongs to
/// `records[i]`.
pub fn monte_carlo_reconstructions(
    records: &[(&CountRecord, &ProjectorSet)],
    resamples: usize,
    opts: &MonteCarloOptions,
) -> Result<Vec<Vec<DensityMatrix>>> {
    if resamples < 2 {
        return Err(Error::Invalid("need at least two resamples".into()));
    }
    let stride: u64 = records
        .iter()
        .map(|(c, _)| c.settings.len() as u64)
        .sum::<u64>()
        .max(1);
    (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut offset = r as u64 * stride;
            records
                .iter()
                .map(|(counts, ps)| {
                    let rec = if opts.resample {
                        resample_record(counts, opts.seed, offset)
                    } else {
                        (*counts).clone()
                    };
                    offset += counts.settings.len() as u64;
                    Ok(mle_reconstruct(&rec, ps, &opts.mle)?.rho_hat)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Monte Carlo distribution of a statistic of one or more reconstructed states.
pub fn monte_carlo_statistic<F>(
    records: &[(&CountRecord, &ProjectorSet)],
    resamples: usize,
    opts: &MonteCarloOptions,
    statistic: F,
) -> Result<MonteCarloSummary>
where
    F: Fn(&[DensityMatrix]) -> Result<f64>,
{
    let values = monte_carlo_reconstructions(records, resamples, opts)?
        .iter()
        .map(|states| statistic(states))
        .collect::<Result<_>>()?;
    Ok(MonteCarloSummary::from_values(values))
}

/// Standard deviation of S(rho_hat) over Monte Carlo resamples.
pub fn monte_carlo_errors(
    counts: &CountRecord,
    ps: &ProjectorSet,
    resamples: usize,
    opts: &MonteCarloOptions,
) -> Result<f64> {
    monte_carlo_statistic(&[(counts, ps)], resamples, opts, |s| {
        von_neumann_entropy(&s[0])
    })
    .map(|m| m.std)
}

/// Finite-statistics model for process tomography.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShotModel {
    /// Exact Born probabilities, reconstructed by linear inversion.
    Exact,
    /// Multinomial counts per setting, reconstructed by MLE.
    Shots(u64),
}

#[derive(Clone, Debug)]
pub struct ProcessTomographyResult {
    pub choi: ChoiMatrix,
    pub fidelity: f64,
    /// Every probe-state reconstruction met its likelihood tolerance.
    pub converged: bool,
    pub max_iterations: usize,
    /// Smallest per-iteration likelihood gain over all probe reconstructions.
    pub min_gain: f64,
}

/// SplitMix64 finalizer, used to derive independent per-probe seeds.
fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Reconstructs the Choi matrix of `channel` from tomography of its outputs
/// on the d_in² probe states of [`ic_projectors`], then compares it to the
/// exact Choi matrix.
pub fn process_tomography(
    channel: &Channel,
    model: ShotModel,
    seed: u64,
    mle: &MleOptions,
) -> Result<ProcessTomographyResult> {
    let d_in = channel.d_in();
    let d_out = channel.d_out();
    if d_in > 6 {
        return Err(Error::DimensionTooLarge(d_in));
    }
    let probe_set = ic_projectors(d_in)?;
    let out_set = ic_projectors(d_out)?;
    let probes: Vec<DensityMatrix> = probe_set
        .probe_states()
        .iter()
        .map(PureState::to_density)
        .collect();

    let outputs: Vec<(ComplexMatrix, bool, usize, f64)> = probes
        .par_iter()
        .enumerate()
        .map(|(k, sigma)| {
            let tau = channel.apply(sigma)?;
            match model {
                ShotModel::Exact => {
                    let p = out_set.probabilities(&tau)?;
                    Ok((linear_inversion(&p, &out_set)?, true, 0, 0.0))
                }
                ShotModel::Shots(shots) => {
                    let counts = simulate_counts(&tau, &out_set, shots, mix_seed(seed, k as u64))?;
                    let rec = mle_reconstruct(&counts, &out_set, mle)?;
                    Ok((rec.rho_hat.into_matrix(), rec.converged, rec.iterations, rec.min_gain))
                }
            }
        })
        .collect::<Result<_>>()?;

    let choi_est = assemble_choi(
        &probes,
        &outputs.iter().map(|o| o.0.clone()).collect::<Vec<_>>(),
        d_in,
        d_out,
    )?;
    let truth = choi(channel)?;
    let fidelity = process_fidelity(&choi_est, &truth)?;
    Ok(ProcessTomographyResult {
        choi: choi_est,
        fidelity,
        converged: outputs.iter().all(|o| o.1),
        max_iterations: outputs.iter().map(|o| o.2).max().unwrap_or(0),
        min_gain: outputs.iter().map(|o| o.3).fold(f64::INFINITY, f64::min),
    })
}

/// Linear inversion over the probe basis, followed by PSD projection, trace
/// normalization and a (X ⊗ I)·J·(X ⊗ I) rescaling that restores
/// Tr_out J = I/d_in.
pub fn assemble_choi(
    probes: &[DensityMatrix],
    outputs: &[ComplexMatrix],
    d_in: usize,
    d_out: usize,
) -> Result<ChoiMatrix> {
    let n = probes.len();
    if n != outputs.len() || n != d_in * d_in {
        return Err(Error::DimensionMismatch {
            expected: d_in * d_in,
            found: n,
        });
    }
    let gram = ComplexMatrix::from_fn(n, n, |k, l| {
        re(probes[k].matrix().trace_product(probes[l].matrix()).re)
    });
    let eig = hermitian_eig(&gram)?;
    let (max, min) = (eig.values[0], *eig.values.last().unwrap());
    if !(min > 0.0) || max / min > MAX_CONDITION {
        return Err(Error::IllConditioned(if min > 0.0 { max / min } else { f64::INFINITY }));
    }
    let gram_inv = eig.map_values(|l| 1.0 / l);

    let dim = d_in * d_out;
    let mut j = ComplexMatrix::zeros(dim, dim);
    for a in 0..d_in {
        for b in 0..d_in {
            // |a⟩⟨b| = Σ_k c_k σ_k with c = G⁻¹ [Tr(σ_l |a⟩⟨b|)]_l
            let rhs: Vec<C64> = probes.iter().map(|s| s.matrix()[(b, a)]).collect();
            let coeffs = gram_inv.mul_vec(&rhs);
            let mut block = ComplexMatrix::zeros(d_out, d_out);
            for (ck, tau) in coeffs.iter().zip(outputs) {
                block = &block + &tau.scale(*ck);
            }
            for r in 0..d_out {
                for s in 0..d_out {
                    j[(a * d_out + r, b * d_out + s)] = block[(r, s)] / d_in as f64;
                }
            }
        }
    }

    let psd = DensityMatrix::project(&j, vec![d_in, d_out])?;
    let witness = crate::states::partial_trace(&psd, &[0])?;
    let w_eig = witness.eig()?;
    if w_eig.values.last().copied().unwrap_or(0.0) <= 1e-12 {
        return Err(Error::InvalidChannel(
            "reconstructed Choi matrix has a singular input marginal".into(),
        ));
    }
    let x = w_eig.map_values(|l| 1.0 / (d_in as f64 * l).sqrt());
    let xi = x.kron(&ComplexMatrix::identity(d_out))?;
    let rescaled = xi.sandwich(psd.matrix());
    let state = DensityMatrix::project(&rescaled, vec![d_in, d_out])?;
    ChoiMatrix::new(state, d_in, d_out)
}
