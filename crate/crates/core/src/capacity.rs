//! Coherent information, its maximization, entropic log-singularity rates and
//! the nonadditivity gap of a product channel.
//!
//! All entropies are in bits. The log-singularity strength x is defined
//! through dS/dε ≈ −x·log₂ε; switching to natural logarithms would rescale it
//! by ln 2.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{tensor, Channel};
use crate::error::{Error, Result};
use crate::linalg::{c, ComplexMatrix};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::states::{family_rho_r, family_rho_u, family_rho_wv, purify, von_neumann_entropy, DensityMatrix};

/// Largest input dimension accepted by [`optimize_ci_general`].
pub const GENERAL_MAX_DIM: usize = 8;

/// S(B(ρ)) − S(B^c(ρ)) in bits.
pub fn coherent_information(ch: &Channel, rho: &DensityMatrix) -> Result<f64> {
    let out = ch.apply(rho)?;
    let env = ch.apply_complementary(rho)?;
    Ok(von_neumann_entropy(&out)? - von_neumann_entropy(&env)?)
}

/// Same quantity, with the environment entropy replaced by the joint output
/// entropy of (B ⊗ id) on a purification of ρ.
pub fn coherent_information_via_purification(ch: &Channel, rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != ch.d_in() {
        return Err(Error::DimensionMismatch {
            expected: ch.d_in(),
            found: rho.dim(),
        });
    }
    let psi = purify(rho)?;
    let reference = psi.dims()[1];
    let kraus = ch.to_kraus();
    let d_out = kraus.d_out();
    let amps = psi.amplitudes();
    // Each (Kᵢ ⊗ I)|ψ⟩ is a pure branch; the joint output is their mixture.
    let mut joint = ComplexMatrix::zeros(d_out * reference, d_out * reference);
    for k in kraus.kraus_ops() {
        let mut branch = vec![c(0.0, 0.0); d_out * reference];
        for b in 0..d_out {
            for a in 0..rho.dim() {
                let kba = k[(b, a)];
                if kba.norm_sqr() == 0.0 {
                    continue;
                }
                for r in 0..reference {
                    branch[b * reference + r] += kba * amps[a * reference + r];
                }
            }
        }
        joint = &joint + &ComplexMatrix::outer(&branch, &branch);
    }
    let joint = DensityMatrix::project(&joint, vec![d_out, reference])?;
    let s_joint = von_neumann_entropy(&joint)?;
    let s_out = von_neumann_entropy(&ch.apply(rho)?)?;
    Ok(s_out - s_joint)
}

/// Projects away tiny negative eigenvalues before evaluating entropies.
fn coherent_information_clipped(ch: &Channel, rho: &DensityMatrix) -> Result<f64> {
    let spectrum = rho.spectrum()?;
    let min = spectrum.last().copied().unwrap_or(0.0);
    if (-1e-9..0.0).contains(&min) {
        let fixed = DensityMatrix::project(rho.matrix(), rho.dims().to_vec())?;
        coherent_information(ch, &fixed)
    } else {
        coherent_information(ch, rho)
    }
}

type Generator = dyn Fn(&[f64]) -> Result<DensityMatrix> + Send + Sync;

/// A parameterized family of input states with box bounds.
#[derive(Clone)]
pub struct StateFamily {
    name: String,
    dim: usize,
    bounds: Vec<(f64, f64)>,
    /// Parameters whose sum may not exceed 1.
    simplex: Vec<usize>,
    generator: Arc<Generator>,
}

impl fmt::Debug for StateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateFamily")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("bounds", &self.bounds)
            .finish()
    }
}

impl StateFamily {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        bounds: Vec<(f64, f64)>,
        generator: impl Fn(&[f64]) -> Result<DensityMatrix> + Send + Sync + 'static,
    ) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > 3 {
            return Err(Error::Invalid(format!(
                "family arity must be 1..=3, got {}",
                bounds.len()
            )));
        }
        if bounds.iter().any(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::Invalid(format!("bad bounds {bounds:?}")));
        }
        Ok(StateFamily {
            name: name.into(),
            dim,
            bounds,
            simplex: Vec::new(),
            generator: Arc::new(generator),
        })
    }

    /// ρ(u) = (1−u)|0⟩⟨0| + u|2⟩⟨2|.
    pub fn rho_u() -> Self {
        Self::new("u", 3, vec![(0.0, 1.0)], |p| family_rho_u(p[0])).expect("static family")
    }

    /// ρ(w, v) with v held fixed; the single parameter is w.
    pub fn rho_w(v: f64) -> Result<Self> {
        family_rho_wv(0.0, v)?;
        Self::new(format!("wv:{v}"), 6, vec![(0.0, 1.0)], move |p| family_rho_wv(p[0], v))
    }

    /// ρ(w, v) with both parameters free.
    pub fn rho_wv() -> Self {
        Self::new("wv", 6, vec![(0.0, 1.0), (0.0, 1.0)], |p| family_rho_wv(p[0], p[1]))
            .expect("static family")
    }

    /// ρ(r₁, r₂, r₃) with r₁ + r₂ ≤ 1.
    pub fn rho_r() -> Self {
        let mut f = Self::new("r", 6, vec![(0.0, 1.0); 3], |p| family_rho_r(p[0], p[1], p[2]))
            .expect("static family");
        f.simplex = vec![0, 1];
        f
    }

    /// (1−t)|0⟩⟨0| + t|1⟩⟨1| on dimension d.
    pub fn two_level(d: usize) -> Self {
        Self::new("t", d, vec![(0.0, 1.0)], move |p| {
            let mut probs = vec![0.0; d];
            probs[0] = 1.0 - p[0];
            probs[1] = p[0];
            DensityMatrix::diagonal(&probs, vec![d])
        })
        .expect("static family")
    }

    /// A one-parameter family that ignores its parameter.
    pub fn constant(state: DensityMatrix) -> Self {
        let d = state.dim();
        Self::new("constant", d, vec![(0.0, 1.0)], move |_| Ok(state.clone()))
            .expect("static family")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn arity(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn is_feasible(&self, params: &[f64]) -> bool {
        params.len() == self.arity()
            && params
                .iter()
                .zip(&self.bounds)
                .all(|(p, (lo, hi))| p >= lo && p <= hi)
            && self.simplex.iter().map(|&i| params[i]).sum::<f64>() <= 1.0 + 1e-12
    }

    pub fn state(&self, params: &[f64]) -> Result<DensityMatrix> {
        if params.len() != self.arity() {
            return Err(Error::DimensionMismatch {
                expected: self.arity(),
                found: params.len(),
            });
        }
        if !self.is_feasible(params) {
            return Err(Error::Invalid(format!(
                "parameters {params:?} outside family `{}`",
                self.name
            )));
        }
        (self.generator)(params)
    }

    /// Feasible interval along `axis` with the other parameters fixed.
    pub fn axis_range(&self, axis: usize, params: &[f64]) -> (f64, f64) {
        let (lo, mut hi) = self.bounds[axis];
        if self.simplex.contains(&axis) {
            let others: f64 = self
                .simplex
                .iter()
                .filter(|&&i| i != axis)
                .map(|&i| params[i])
                .sum();
            hi = hi.min(1.0 - others);
        }
        (lo, hi)
    }

    /// Every point of a `points`-per-axis grid over the bounds, in
    /// lexicographic order; infeasible points are skipped.
    pub fn grid(&self, points: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .bounds
            .iter()
            .map(|&(lo, hi)| linspace(lo, hi, points))
            .collect();
        let mut out = vec![Vec::new()];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out.retain(|p| self.is_feasible(p));
        out
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Outcome of a coherent-information maximization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_params: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct FamilySearch {
    pub grid_points: usize,
    pub nelder_mead: NelderMeadOptions,
}

impl Default for FamilySearch {
    fn default() -> Self {
        FamilySearch {
            grid_points: 51,
            nelder_mead: NelderMeadOptions::default(),
        }
    }
}

fn check_family(ch: &Channel, family: &StateFamily) -> Result<()> {
    if family.dim() != ch.d_in() {
        return Err(Error::DimensionMismatch {
            expected: ch.d_in(),
            found: family.dim(),
        });
    }
    Ok(())
}

/// Maximizes coherent information over a state family with the default search.
pub fn optimize_ci_family(ch: &Channel, family: &StateFamily) -> Result<OptimizationResult> {
    optimize_ci_family_with(ch, family, &FamilySearch::default())
}

/// Grid search followed by Nelder–Mead refinement from the best grid point.
pub fn optimize_ci_family_with(
    ch: &Channel,
    family: &StateFamily,
    search: &FamilySearch,
) -> Result<OptimizationResult> {
    check_family(ch, family)?;
    let grid = family.grid(search.grid_points.max(1));
    if grid.is_empty() {
        return Err(Error::Invalid("family grid has no feasible points".into()));
    }
    let values: Vec<f64> = grid
        .par_iter()
        .map(|p| {
            family
                .state(p)
                .and_then(|rho| coherent_information_clipped(ch, &rho))
                .unwrap_or(f64::NEG_INFINITY)
        })
        .collect();
    // First maximum in grid order, independent of scheduling.
    let (best_idx, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });

    let objective = |p: &[f64]| -> f64 {
        if !family.is_feasible(p) {
            return f64::INFINITY;
        }
        match family
            .state(p)
            .and_then(|rho| coherent_information_clipped(ch, &rho))
        {
            Ok(v) => -v,
            Err(_) => f64::INFINITY,
        }
    };
    let min = nelder_mead(
        objective,
        &grid[best_idx],
        Some(family.bounds()),
        &search.nelder_mead,
    );
    let best_value = coherent_information_clipped(ch, &family.state(&min.x)?)?;
    Ok(OptimizationResult {
        best_params: min.x,
        best_value,
        evaluations: grid.len() + min.evaluations,
        converged: min.converged,
    })
}

/// ρ = L L† / Tr(L L†) from d² reals: d real diagonal entries of L followed
/// by (re, im) pairs of the strictly lower triangle in row order.
pub fn cholesky_state(params: &[f64], d: usize) -> Result<DensityMatrix> {
    if params.len() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            found: params.len(),
        });
    }
    let mut l = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        l[(i, i)] = c(params[i], 0.0);
    }
    let mut k = d;
    for i in 0..d {
        for j in 0..i {
            l[(i, j)] = c(params[k], params[k + 1]);
            k += 2;
        }
    }
    let m = l.matmul(&l.adjoint());
    let tr = m.trace().re;
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::InvalidState("degenerate Cholesky factor".into()));
    }
    DensityMatrix::project(&m.scale_real(1.0 / tr), vec![d])
}

#[derive(Clone, Debug)]
pub struct GeneralSearch {
    pub restarts: usize,
    pub seed: u64,
    pub nelder_mead: NelderMeadOptions,
}

impl GeneralSearch {
    pub fn new(restarts: usize, seed: u64) -> Self {
        GeneralSearch {
            restarts,
            seed,
            nelder_mead: NelderMeadOptions::default(),
        }
    }
}

/// Nelder–Mead over all input states from `restarts` seeded random starts.
pub fn optimize_ci_general(ch: &Channel, restarts: usize) -> Result<OptimizationResult> {
    optimize_ci_general_with(ch, &GeneralSearch::new(restarts, 0))
}

pub fn optimize_ci_general_with(ch: &Channel, search: &GeneralSearch) -> Result<OptimizationResult> {
    let d = ch.d_in();
    if d > GENERAL_MAX_DIM {
        return Err(Error::DimensionTooLarge(d));
    }
    if search.restarts == 0 {
        return Err(Error::Invalid("need at least one restart".into()));
    }
    let objective = |p: &[f64]| -> f64 {
        match cholesky_state(p, d).and_then(|rho| coherent_information(ch, &rho)) {
            Ok(v) => -v,
            Err(_) => f64::INFINITY,
        }
    };
    let runs: Vec<_> = (0..search.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
            rng.set_stream(r as u64);
            let x0: Vec<f64> = (0..d * d).map(|_| StandardNormal.sample(&mut rng)).collect();
            nelder_mead(objective, &x0, None, &search.nelder_mead)
        })
        .collect();
    let mut order: Vec<usize> = (0..runs.len()).collect();
    order.sort_by(|&a, &b| runs[a].value.total_cmp(&runs[b].value));
    let best = &runs[order[0]];
    let converged = match order.get(1) {
        Some(&second) => (runs[second].value - best.value).abs() < 1e-5,
        None => best.converged,
    };
    let best_value = coherent_information(ch, &cholesky_state(&best.x, d)?)?;
    Ok(OptimizationResult {
        best_params: best.x.clone(),
        best_value,
        evaluations: runs.iter().map(|r| r.evaluations).sum(),
        converged,
    })
}

/// Which side of the channel's dilation an entropy is taken on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Output,
    #[serde(alias = "env")]
    Complement,
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "output" | "out" => Ok(Side::Output),
            "env" | "environment" | "complement" => Ok(Side::Complement),
            other => Err(Error::Parse(format!("unknown side `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SingularityMethod {
    Spectral,
    Regression,
}

/// Fitted log-singularity strength with diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularityEstimate {
    /// Strength x ≥ 0 (negative fitted slopes are reported as 0).
    pub x: f64,
    pub method: SingularityMethod,
    /// RMS regression residual; 0 for the spectral method.
    pub fit_residual: f64,
    pub eps_window: (f64, f64),
    /// Regression slope before clipping, or the spectral sum.
    pub raw_slope: f64,
    /// Linear growth rates of the vanishing eigenvalues (spectral method).
    pub rates: Vec<f64>,
}

fn side_state(ch: &Channel, side: Side, rho: &DensityMatrix) -> Result<DensityMatrix> {
    match side {
        Side::Output => ch.apply(rho),
        Side::Complement => ch.apply_complementary(rho),
    }
}

fn check_singularity_family(ch: &Channel, family: &StateFamily) -> Result<()> {
    check_family(ch, family)?;
    if family.arity() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: family.arity(),
        });
    }
    Ok(())
}

/// Entropy S(ε) of one side of the channel along a one-parameter family.
pub fn entropy_along(ch: &Channel, side: Side, family: &StateFamily, eps: f64) -> Result<f64> {
    von_neumann_entropy(&side_state(ch, side, &family.state(&[eps])?)?)
}

pub const REGRESSION_POINTS: usize = 40;
pub const DEFAULT_EPS_WINDOW: (f64, f64) = (1e-4, 1e-1);

/// Slope of dS/dε against −log₂ε over log-spaced ε in `window`.
pub fn singularity_rate_regression(
    ch: &Channel,
    side: Side,
    family: &StateFamily,
    window: (f64, f64),
) -> Result<SingularityEstimate> {
    check_singularity_family(ch, family)?;
    let (lo, hi) = window;
    let (blo, bhi) = family.bounds()[0];
    if !(lo > 0.0 && lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::Invalid(format!("degenerate window [{lo}, {hi}]")));
    }
    if lo < blo || hi > bhi {
        return Err(Error::Invalid(format!(
            "window [{lo}, {hi}] outside family bounds [{blo}, {bhi}]"
        )));
    }
    let n = REGRESSION_POINTS;
    let eps: Vec<f64> = linspace(lo.log10(), hi.log10(), n)
        .into_iter()
        .map(|t| 10f64.powf(t))
        .collect();
    let s: Vec<f64> = eps
        .iter()
        .map(|&e| entropy_along(ch, side, family, e))
        .collect::<Result<_>>()?;

    let deriv: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            (s[b] - s[a]) / (eps[b] - eps[a])
        })
        .collect();
    let xs: Vec<f64> = eps.iter().map(|e| -e.log2()).collect();
    let (slope, intercept) = least_squares_line(&xs, &deriv);
    let rms = (xs
        .iter()
        .zip(&deriv)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    Ok(SingularityEstimate {
        x: slope.max(0.0),
        method: SingularityMethod::Regression,
        fit_residual: rms,
        eps_window: window,
        raw_slope: slope,
        rates: Vec::new(),
    })
}

fn least_squares_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    (slope, my - slope * mx)
}

pub const SPECTRAL_EPS: (f64, f64) = (1e-6, 2e-6);

/// Sum of the linear growth rates of eigenvalues that emerge from zero.
///
/// An eigenvalue counts when it exceeds 1e-10 at ε₁ and doubles (ratio within
/// [1.9, 2.1]) between ε₁ and ε₂ = 2ε₁.
pub fn singularity_rate_spectral(
    ch: &Channel,
    side: Side,
    family: &StateFamily,
) -> Result<SingularityEstimate> {
    check_singularity_family(ch, family)?;
    let (e1, e2) = SPECTRAL_EPS;
    let l1 = side_state(ch, side, &family.state(&[e1])?)?.spectrum()?;
    let l2 = side_state(ch, side, &family.state(&[e2])?)?.spectrum()?;
    let rates: Vec<f64> = l1
        .iter()
        .zip(&l2)
        .filter(|(&a, &b)| a > 1e-10 && (1.9..=2.1).contains(&(b / a)))
        .map(|(&a, _)| a / e1)
        .collect();
    let x = rates.iter().fold(0.0, |acc, r| acc + r);
    Ok(SingularityEstimate {
        x,
        method: SingularityMethod::Spectral,
        fit_residual: 0.0,
        eps_window: SPECTRAL_EPS,
        raw_slope: x,
        rates,
    })
}

/// Ic(A ⊗ B, ρ) − q_a − q_b.
pub fn delta_nonadditivity(
    ch_a: &Channel,
    ch_b: &Channel,
    joint_input: &DensityMatrix,
    q_a: f64,
    q_b: f64,
) -> Result<f64> {
    let joint: Channel = tensor(ch_a, ch_b)?.into();
    delta_with_joint(&joint, joint_input, q_a, q_b)
}

fn delta_with_joint(joint: &Channel, rho: &DensityMatrix, q_a: f64, q_b: f64) -> Result<f64> {
    Ok(coherent_information_clipped(joint, rho)? - q_a - q_b)
}

/// Single point on a parameter curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub param: f64,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
}

/// One-axis sweep of Δ through a three-parameter family.
#[derive(Clone, Debug)]
pub struct DeltaScan {
    pub axis: usize,
    /// Values of the two other parameters, in parameter order.
    pub fixed: [f64; 2],
    pub grid_points: usize,
    /// Sweep interval; defaults to the feasible range along the axis.
    pub range: Option<(f64, f64)>,
    pub q_a: f64,
    pub q_b: f64,
}

pub fn scan_delta(
    ch_a: &Channel,
    ch_b: &Channel,
    family: &StateFamily,
    scan: &DeltaScan,
) -> Result<Vec<CurvePoint>> {
    if family.arity() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: family.arity(),
        });
    }
    if scan.axis > 2 {
        return Err(Error::Invalid(format!("axis {} not in 0..=2", scan.axis)));
    }
    if scan.grid_points == 0 {
        return Err(Error::Invalid("grid_points must be positive".into()));
    }
    let joint: Channel = tensor(ch_a, ch_b)?.into();
    check_family(&joint, family)?;
    let params_at = |t: f64| -> Vec<f64> {
        let mut p = scan.fixed.to_vec();
        p.insert(scan.axis, t);
        p
    };
    let (lo, hi) = match scan.range {
        Some(r) => r,
        None => family.axis_range(scan.axis, &params_at(0.0)),
    };
    if !(lo <= hi) || !family.is_feasible(&params_at(lo)) || !family.is_feasible(&params_at(hi)) {
        return Err(Error::Invalid(format!(
            "scan interval [{lo}, {hi}] with fixed {:?} violates family bounds",
            scan.fixed
        )));
    }
    let ts = linspace(lo, hi, scan.grid_points);
    ts.par_iter()
        .map(|&t| {
            let rho = family.state(&params_at(t))?;
            Ok(CurvePoint {
                param: t,
                value: delta_with_joint(&joint, &rho, scan.q_a, scan.q_b)?,
                std: None,
            })
        })
        .collect()
}
