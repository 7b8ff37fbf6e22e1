//! Validated jobs. Every spec is parsed and checked against the channel
//! dimensions in [`Job::from_command`], before any computation runs.

use std::collections::BTreeMap;

use cohinfo_core::capacity::{
    entropy_along, linspace, optimize_ci_family_with, optimize_ci_general_with,
    singularity_rate_regression, FamilySearch, GeneralSearch, REGRESSION_POINTS,
};
use cohinfo_core::tomography::{monte_carlo_reconstructions, MonteCarloOptions, MonteCarloSummary};
use cohinfo_core::{
    coherent_information, fidelity, ic_projectors, mle_reconstruct, process_tomography,
    scan_delta, simulate_counts, singularity_rate_spectral, von_neumann_entropy, Channel,
    ChannelSpec, CurvePoint, DeltaScan, DensityMatrix, MleOptions, ShotModel, Side,
    SingularityMethod, StateFamily,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::args::{Command, MethodArg, SideArg};
use crate::spec::{parse_axis, parse_fixed, parse_range, parse_state, FamilySpec};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<cohinfo_core::Error> for CliError {
    fn from(e: cohinfo_core::Error) -> Self {
        CliError::Numerical(e.to_string())
    }
}

fn usage<T>(r: Result<T, String>) -> Result<T, CliError> {
    r.map_err(CliError::Usage)
}

fn build_channel(spec: &str) -> Result<Channel, CliError> {
    let parsed: ChannelSpec = spec
        .parse()
        .map_err(|e: cohinfo_core::Error| CliError::Usage(format!("channel `{spec}`: {e}")))?;
    parsed
        .build()
        .map_err(|e| CliError::Usage(format!("channel `{spec}`: {e}")))
}

fn check_dim(what: &str, expected: usize, found: usize) -> Result<(), CliError> {
    if expected != found {
        return Err(CliError::Usage(format!(
            "{what} has dimension {found} but the channel input has dimension {expected}"
        )));
    }
    Ok(())
}

pub enum Job {
    CiPoint {
        channel: Channel,
        rho: DensityMatrix,
    },
    CiCurve {
        channel: Channel,
        family: StateFamily,
        grid: usize,
    },
    OptimizeFamily {
        channel: Channel,
        family: StateFamily,
        grid: usize,
    },
    OptimizeGeneral {
        channel: Channel,
        restarts: usize,
        seed: u64,
    },
    Singularity {
        channel: Channel,
        family: StateFamily,
        side: Side,
        method: SingularityMethod,
        window: (f64, f64),
    },
    ScanDelta {
        a: Channel,
        b: Channel,
        scan: DeltaScan,
        q_a: Option<f64>,
        q_b: Option<f64>,
        restarts: usize,
        seed: u64,
    },
    TomoState {
        channel: Channel,
        rho: DensityMatrix,
        shots: u64,
        resamples: usize,
        resample: bool,
        mle: MleOptions,
        seed: u64,
        save_counts: Option<String>,
    },
    TomoProcess {
        channel: Channel,
        model: ShotModel,
        mle: MleOptions,
        seed: u64,
    },
}

/// Scalars, curve and uncertainties of a finished job; `failure` marks a
/// numerical failure whose partial results are still reported.
#[derive(Default)]
pub struct Outcome {
    pub scalars: BTreeMap<String, Value>,
    pub curve: Vec<CurvePoint>,
    pub uncertainty: BTreeMap<String, f64>,
    pub failure: Option<String>,
}

impl Outcome {
    fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.scalars.insert(key.to_string(), value.into());
    }
}

fn positive_mle(max_iter: usize) -> Result<MleOptions, CliError> {
    if max_iter == 0 {
        return Err(CliError::Usage("--max-iter must be at least 1".into()));
    }
    Ok(MleOptions {
        max_iter,
        ..Default::default()
    })
}

fn tomography_dim(what: &str, d: usize) -> Result<(), CliError> {
    if !(2..=8).contains(&d) {
        return Err(CliError::Usage(format!(
            "{what} has dimension {d}; tomography supports 2 to 8"
        )));
    }
    Ok(())
}

impl Job {
    pub fn from_command(cmd: &Command, seed: u64) -> Result<Job, CliError> {
        Ok(match cmd {
            Command::Ci(a) => {
                let channel = build_channel(&a.channel)?;
                if let Some(state) = &a.state {
                    let rho = usage(parse_state(state))?;
                    check_dim("state", channel.d_in(), rho.dim())?;
                    Job::CiPoint { channel, rho }
                } else {
                    let spec = usage(FamilySpec::parse(a.family.as_deref().unwrap_or_default()))?;
                    match spec {
                        FamilySpec::UPoint(u) => {
                            let rho = usage(parse_state(&format!("u:{u}")))?;
                            check_dim("state", channel.d_in(), rho.dim())?;
                            Job::CiPoint { channel, rho }
                        }
                        FamilySpec::U | FamilySpec::WvFixed(_) => {
                            let family = usage(spec.family())?.expect("one-parameter family");
                            check_dim("family", channel.d_in(), family.dim())?;
                            if a.grid < 2 {
                                return Err(CliError::Usage("--grid must be at least 2".into()));
                            }
                            Job::CiCurve {
                                channel,
                                family,
                                grid: a.grid,
                            }
                        }
                        _ => {
                            return Err(CliError::Usage(
                                "ci sweeps one-parameter families only (`u`, `wv:<v>`)".into(),
                            ))
                        }
                    }
                }
            }
            Command::Optimize(a) => {
                let channel = build_channel(&a.channel)?;
                match usage(FamilySpec::parse(&a.family))? {
                    FamilySpec::General => {
                        if a.restarts == 0 {
                            return Err(CliError::Usage("--restarts must be at least 1".into()));
                        }
                        if channel.d_in() > cohinfo_core::capacity::GENERAL_MAX_DIM {
                            return Err(CliError::Usage(format!(
                                "general optimization supports input dimension up to {}",
                                cohinfo_core::capacity::GENERAL_MAX_DIM
                            )));
                        }
                        Job::OptimizeGeneral {
                            channel,
                            restarts: a.restarts,
                            seed,
                        }
                    }
                    FamilySpec::UPoint(_) => {
                        return Err(CliError::Usage(
                            "optimize needs a free family, not a fixed point".into(),
                        ))
                    }
                    spec => {
                        let family = usage(spec.family())?.expect("parameterized family");
                        check_dim("family", channel.d_in(), family.dim())?;
                        if a.grid == 0 {
                            return Err(CliError::Usage("--grid must be at least 1".into()));
                        }
                        Job::OptimizeFamily {
                            channel,
                            family,
                            grid: a.grid,
                        }
                    }
                }
            }
            Command::Singularity(a) => {
                let channel = build_channel(&a.channel)?;
                let spec = usage(FamilySpec::parse(&a.family))?;
                let family = match spec {
                    FamilySpec::U | FamilySpec::WvFixed(_) => {
                        usage(spec.family())?.expect("one-parameter family")
                    }
                    _ => {
                        return Err(CliError::Usage(
                            "singularity needs a one-parameter family (`u`, `wv:<v>`)".into(),
                        ))
                    }
                };
                check_dim("family", channel.d_in(), family.dim())?;
                if !(a.eps_min > 0.0 && a.eps_min < a.eps_max && a.eps_max <= 1.0) {
                    return Err(CliError::Usage(format!(
                        "regression window [{}, {}] must satisfy 0 < min < max <= 1",
                        a.eps_min, a.eps_max
                    )));
                }
                Job::Singularity {
                    channel,
                    family,
                    side: match a.side {
                        SideArg::Output => Side::Output,
                        SideArg::Env => Side::Complement,
                    },
                    method: match a.method {
                        MethodArg::Spectral => SingularityMethod::Spectral,
                        MethodArg::Regression => SingularityMethod::Regression,
                    },
                    window: (a.eps_min, a.eps_max),
                }
            }
            Command::ScanDelta(a) => {
                let ch_a = build_channel(&a.channel_a)?;
                let ch_b = build_channel(&a.channel_b)?;
                let axis = usage(parse_axis(&a.axis))?;
                let fixed = usage(parse_fixed(&a.fixed, axis))?;
                let range = a.range.as_deref().map(parse_range).transpose();
                let range = usage(range)?;
                let family = StateFamily::rho_r();
                check_dim("family r", ch_a.d_in() * ch_b.d_in(), family.dim())?;
                if a.grid == 0 {
                    return Err(CliError::Usage("--grid must be at least 1".into()));
                }
                for (name, q) in [("--qa", a.qa), ("--qb", a.qb)] {
                    if q.is_some_and(|q| !q.is_finite()) {
                        return Err(CliError::Usage(format!("{name} must be finite")));
                    }
                }
                if (a.qa.is_none() || a.qb.is_none()) && a.restarts == 0 {
                    return Err(CliError::Usage("--restarts must be at least 1".into()));
                }
                let at = |t: f64| {
                    let mut p = fixed.to_vec();
                    p.insert(axis, t);
                    p
                };
                let (lo, hi) = range.unwrap_or_else(|| family.axis_range(axis, &at(0.0)));
                if !family.is_feasible(&at(lo)) || !family.is_feasible(&at(hi)) {
                    return Err(CliError::Usage(format!(
                        "scan [{lo}, {hi}] with {} leaves the family's parameter region",
                        a.fixed
                    )));
                }
                Job::ScanDelta {
                    a: ch_a,
                    b: ch_b,
                    scan: DeltaScan {
                        axis,
                        fixed,
                        grid_points: a.grid,
                        range,
                        q_a: 0.0,
                        q_b: 0.0,
                    },
                    q_a: a.qa,
                    q_b: a.qb,
                    restarts: a.restarts,
                    seed,
                }
            }
            Command::TomoState(a) => {
                let channel = build_channel(&a.channel)?;
                let rho = usage(parse_state(&a.state))?;
                check_dim("state", channel.d_in(), rho.dim())?;
                tomography_dim("channel output", channel.d_out())?;
                if a.shots == 0 {
                    return Err(CliError::Usage("--shots must be at least 1".into()));
                }
                if a.resamples < 2 {
                    return Err(CliError::Usage("--resamples must be at least 2".into()));
                }
                Job::TomoState {
                    channel,
                    rho,
                    shots: a.shots,
                    resamples: a.resamples,
                    resample: !a.no_resample,
                    mle: positive_mle(a.max_iter)?,
                    seed,
                    save_counts: a.save_counts.clone(),
                }
            }
            Command::TomoProcess(a) => {
                let channel = build_channel(&a.channel)?;
                if channel.d_in() > 6 {
                    return Err(CliError::Usage(format!(
                        "process tomography supports input dimension up to 6, got {}",
                        channel.d_in()
                    )));
                }
                tomography_dim("channel input", channel.d_in())?;
                tomography_dim("channel output", channel.d_out())?;
                let model = if a.noiseless {
                    ShotModel::Exact
                } else if a.shots == 0 {
                    return Err(CliError::Usage("--shots must be at least 1".into()));
                } else {
                    ShotModel::Shots(a.shots)
                };
                Job::TomoProcess {
                    channel,
                    model,
                    mle: positive_mle(a.max_iter)?,
                    seed,
                }
            }
        })
    }

    /// Whether the job produces a curve (required for CSV output).
    pub fn has_curve(&self) -> bool {
        match self {
            Job::CiCurve { .. } | Job::ScanDelta { .. } => true,
            Job::Singularity { method, .. } => *method == SingularityMethod::Regression,
            _ => false,
        }
    }

    pub fn run(self) -> Result<Outcome, CliError> {
        let mut out = Outcome::default();
        match self {
            Job::CiPoint { channel, rho } => {
                let s_out = von_neumann_entropy(&channel.apply(&rho)?)?;
                let s_env = von_neumann_entropy(&channel.apply_complementary(&rho)?)?;
                out.set("coherent_information", s_out - s_env);
                out.set("entropy_output", s_out);
                out.set("entropy_env", s_env);
            }
            Job::CiCurve {
                channel,
                family,
                grid,
            } => {
                let (lo, hi) = family.bounds()[0];
                out.curve = linspace(lo, hi, grid)
                    .par_iter()
                    .map(|&t| {
                        let value = coherent_information(&channel, &family.state(&[t])?)?;
                        Ok(CurvePoint {
                            param: t,
                            value,
                            std: None,
                        })
                    })
                    .collect::<Result<_, cohinfo_core::Error>>()?;
                let best = argmax(&out.curve);
                out.set("max_value", out.curve[best].value);
                out.set("argmax", out.curve[best].param);
                out.set("family", family.name());
            }
            Job::OptimizeFamily {
                channel,
                family,
                grid,
            } => {
                let search = FamilySearch {
                    grid_points: grid,
                    ..Default::default()
                };
                let r = optimize_ci_family_with(&channel, &family, &search)?;
                out.set("best_value", r.best_value);
                out.set("best_params", r.best_params);
                out.set("evaluations", r.evaluations);
                out.set("converged", r.converged);
                out.set("family", family.name());
            }
            Job::OptimizeGeneral {
                channel,
                restarts,
                seed,
            } => {
                let r = optimize_ci_general_with(&channel, &GeneralSearch::new(restarts, seed))?;
                out.set("best_value", r.best_value);
                out.set("best_params", r.best_params);
                out.set("evaluations", r.evaluations);
                out.set("converged", r.converged);
                out.set("family", "general");
            }
            Job::Singularity {
                channel,
                family,
                side,
                method,
                window,
            } => {
                let est = match method {
                    SingularityMethod::Spectral => singularity_rate_spectral(&channel, side, &family)?,
                    SingularityMethod::Regression => {
                        let est = singularity_rate_regression(&channel, side, &family, window)?;
                        // Entropy on the log-spaced points the fit used.
                        let (lo, hi) = window;
                        let ratio = (hi / lo).ln();
                        out.curve = (0..REGRESSION_POINTS)
                            .map(|i| {
                                let eps =
                                    lo * (ratio * i as f64 / (REGRESSION_POINTS - 1) as f64).exp();
                                Ok(CurvePoint {
                                    param: eps,
                                    value: entropy_along(&channel, side, &family, eps)?,
                                    std: None,
                                })
                            })
                            .collect::<Result<_, cohinfo_core::Error>>()?;
                        est
                    }
                };
                out.set("x", est.x);
                out.set("raw_slope", est.raw_slope);
                out.set("fit_residual", est.fit_residual);
                out.set("eps_window", vec![est.eps_window.0, est.eps_window.1]);
                out.set("rates", est.rates);
                out.set("method", json!(est.method));
                out.set("side", json!(side));
            }
            Job::ScanDelta {
                a,
                b,
                mut scan,
                q_a,
                q_b,
                restarts,
                seed,
            } => {
                let capacity = |ch: &Channel, given: Option<f64>| -> Result<(f64, &str), CliError> {
                    Ok(match given {
                        Some(q) => (q, "given"),
                        None => {
                            let r = optimize_ci_general_with(ch, &GeneralSearch::new(restarts, seed))?;
                            (r.best_value.max(0.0), "optimized")
                        }
                    })
                };
                let (qa, qa_src) = capacity(&a, q_a)?;
                let (qb, qb_src) = capacity(&b, q_b)?;
                scan.q_a = qa;
                scan.q_b = qb;
                out.curve = scan_delta(&a, &b, &StateFamily::rho_r(), &scan)?;
                let best = argmax(&out.curve);
                out.set("q_a", qa);
                out.set("q_b", qb);
                out.set("q_a_source", qa_src);
                out.set("q_b_source", qb_src);
                out.set("delta_max", out.curve[best].value);
                out.set("argmax", out.curve[best].param);
                if let Some((lo, hi)) = positive_run(&out.curve, best) {
                    out.set("positive_interval", vec![lo, hi]);
                } else {
                    out.set("positive_interval", Value::Null);
                }
            }
            Job::TomoState {
                channel,
                rho,
                shots,
                resamples,
                resample,
                mle,
                seed,
                save_counts,
            } => tomo_state(&mut out, &channel, &rho, shots, resamples, resample, mle, seed, save_counts)?,
            Job::TomoProcess {
                channel,
                model,
                mle,
                seed,
            } => {
                let r = process_tomography(&channel, model, seed, &mle)?;
                out.set("process_fidelity", r.fidelity);
                out.set("converged", r.converged);
                out.set("max_iterations", r.max_iterations);
                out.set("min_likelihood_gain", r.min_gain);
                out.set(
                    "shots",
                    match model {
                        ShotModel::Exact => Value::Null,
                        ShotModel::Shots(n) => n.into(),
                    },
                );
                if !r.converged {
                    out.failure = Some("maximum-likelihood reconstruction did not converge".into());
                }
            }
        }
        Ok(out)
    }
}

#[allow(clippy::too_many_arguments)]
fn tomo_state(
    out: &mut Outcome,
    channel: &Channel,
    rho: &DensityMatrix,
    shots: u64,
    resamples: usize,
    resample: bool,
    mle: MleOptions,
    seed: u64,
    save_counts: Option<String>,
) -> Result<(), CliError> {
    let states = [channel.apply(rho)?, channel.apply_complementary(rho)?];
    let mut records = Vec::new();
    let mut sets = Vec::new();
    for (i, state) in states.iter().enumerate() {
        let ps = ic_projectors(state.dim()).map_err(|e| {
            CliError::Usage(format!("{} state: {e}", ["output", "environment"][i]))
        })?;
        // Distinct seeds keep the two simulated experiments independent.
        records.push(simulate_counts(state, &ps, shots, seed.wrapping_add(i as u64))?);
        sets.push(ps);
    }
    if let Some(path) = save_counts {
        let text = serde_json::to_string_pretty(&records[0]).expect("count record is serializable");
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
    }
    let recs: Vec<_> = records
        .iter()
        .zip(&sets)
        .map(|(c, ps)| mle_reconstruct(c, ps, &mle))
        .collect::<Result<_, _>>()?;
    let s_hat: Vec<f64> = recs
        .iter()
        .map(|r| von_neumann_entropy(&r.rho_hat))
        .collect::<Result<_, _>>()?;
    let s_true: Vec<f64> = states
        .iter()
        .map(von_neumann_entropy)
        .collect::<Result<_, _>>()?;

    let pairs: Vec<_> = records.iter().zip(&sets).collect();
    let opts = MonteCarloOptions {
        seed,
        resample,
        mle,
    };
    let mc = monte_carlo_reconstructions(&pairs, resamples, &opts)?;
    let entropies: Vec<[f64; 2]> = mc
        .iter()
        .map(|s| Ok([von_neumann_entropy(&s[0])?, von_neumann_entropy(&s[1])?]))
        .collect::<Result<_, cohinfo_core::Error>>()?;
    let std_of = |f: &dyn Fn(&[f64; 2]) -> f64| {
        MonteCarloSummary::from_values(entropies.iter().map(f).collect()).std
    };

    out.set("entropy_output", s_hat[0]);
    out.set("entropy_env", s_hat[1]);
    out.set("coherent_information", s_hat[0] - s_hat[1]);
    out.set("entropy_output_exact", s_true[0]);
    out.set("entropy_env_exact", s_true[1]);
    out.set("coherent_information_exact", s_true[0] - s_true[1]);
    out.set("fidelity_output", fidelity(&recs[0].rho_hat, &states[0])?);
    out.set("fidelity_env", fidelity(&recs[1].rho_hat, &states[1])?);
    out.set("iterations", vec![recs[0].iterations, recs[1].iterations]);
    out.set("converged", recs.iter().all(|r| r.converged));
    out.set("shots", shots);
    out.set("resamples", resamples);
    out.uncertainty.insert("entropy_output".into(), std_of(&|e| e[0]));
    out.uncertainty.insert("entropy_env".into(), std_of(&|e| e[1]));
    out.uncertainty.insert("coherent_information".into(), std_of(&|e| e[0] - e[1]));
    if !recs.iter().all(|r| r.converged) {
        out.failure = Some("maximum-likelihood reconstruction did not converge".into());
    }
    Ok(())
}

/// First index of the largest value.
fn argmax(curve: &[CurvePoint]) -> usize {
    let mut best = 0;
    for (i, p) in curve.iter().enumerate() {
        if p.value > curve[best].value {
            best = i;
        }
    }
    best
}

/// Parameter range of the run of positive values containing `peak`.
fn positive_run(curve: &[CurvePoint], peak: usize) -> Option<(f64, f64)> {
    if curve[peak].value <= 0.0 {
        return None;
    }
    let mut lo = peak;
    while lo > 0 && curve[lo - 1].value > 0.0 {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < curve.len() && curve[hi + 1].value > 0.0 {
        hi += 1;
    }
    Some((curve[lo].param, curve[hi].param))
}
