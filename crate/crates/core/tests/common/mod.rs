//! Helpers shared by the integration test targets: random channels, the
//! closed-form platypus oracle and seed-driven invariant checks.

#![allow(dead_code)]

use cohinfo_core::linalg::{random_unitary, ComplexMatrix, C64};
use cohinfo_core::states::{random_density, random_pure};
use cohinfo_core::tomography::{ic_projectors, simulate_counts};
use cohinfo_core::{
    amplitude_damping, depolarizing, erasure, optimize_ci_general, partial_trace, platypus,
    tensor, von_neumann_entropy, Channel, DensityMatrix, IsometryChannel, KrausChannel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn h2(p: f64) -> f64 {
    let t = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    t(p) + t(1.0 - p)
}

/// Ic(M₃, ρ(u)) by hand: the output is diag((1−u)/2, (1−u)/2, u) and the
/// environment is diag((1+u)/2, (1−u)/2, 0).
pub fn platypus_ci_closed_form(u: f64) -> f64 {
    let t = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    2.0 * t((1.0 - u) / 2.0) + t(u) - h2((1.0 - u) / 2.0)
}

/// Random isometric channel with the given dimensions.
pub fn random_isometry_channel<R: Rng>(d_in: usize, d_out: usize, d_env: usize, rng: &mut R) -> Channel {
    let u = random_unitary(d_out * d_env, rng);
    let iso = ComplexMatrix::from_fn(d_out * d_env, d_in, |i, j| u[(i, j)]);
    IsometryChannel::new(iso, d_out, d_env)
        .expect("columns of a unitary form an isometry")
        .into()
}

/// Draws from a mix of named channels and random isometries.
pub fn random_channel<R: Rng>(rng: &mut R) -> Channel {
    match rng.random_range(0..6) {
        0 => platypus(3).unwrap().into(),
        1 => amplitude_damping(rng.random_range(0.0..=1.0)).unwrap().into(),
        2 => erasure(rng.random_range(0.0..=1.0), rng.random_range(2..=3)).unwrap().into(),
        3 => depolarizing(rng.random_range(0.0..=1.0), rng.random_range(2..=3)).unwrap().into(),
        4 => {
            let a: Channel = platypus(3).unwrap().into();
            let b: Channel = amplitude_damping(rng.random_range(0.0..=1.0)).unwrap().into();
            tensor(&a, &b).unwrap().into()
        }
        _ => {
            let d_in: usize = rng.random_range(2..=4);
            let d_out = rng.random_range(2..=4);
            let d_env = rng.random_range(1..=4).max(d_in.div_ceil(d_out));
            random_isometry_channel(d_in, d_out, d_env, rng)
        }
    }
}

/// Random full-rank or pure input state for `ch`.
pub fn random_input<R: Rng>(ch: &Channel, rng: &mut R) -> DensityMatrix {
    if rng.random_bool(0.3) {
        random_pure(ch.d_in(), rng).to_density()
    } else {
        random_density(ch.d_in(), rng)
    }
}

pub fn completeness_defect(k: &KrausChannel) -> f64 {
    let d = k.d_in();
    let mut sum = ComplexMatrix::zeros(d, d);
    for op in k.kraus_ops() {
        sum = &sum + &op.adjoint().matmul(op);
    }
    sum.max_abs_diff(&ComplexMatrix::identity(d))
}

/// S(ρ ⊗ σ) − S(ρ) − S(σ) for random states of random dimension.
pub fn entropy_additivity_gap(seed: u64) -> f64 {
    let mut r = rng(seed);
    let a = random_density(r.random_range(1..=4), &mut r);
    let b = random_density(r.random_range(1..=4), &mut r);
    let joint = a.tensor(&b).unwrap();
    (von_neumann_entropy(&joint).unwrap()
        - von_neumann_entropy(&a).unwrap()
        - von_neumann_entropy(&b).unwrap())
    .abs()
}

/// |S(UρU†) − S(ρ)| for a Haar-random U.
pub fn unitary_invariance_gap(seed: u64) -> f64 {
    let mut r = rng(seed);
    let d = r.random_range(1..=6);
    let rho = random_density(d, &mut r);
    let u = random_unitary(d, &mut r);
    let rotated = rho.conjugate_by(&u).unwrap();
    (von_neumann_entropy(&rotated).unwrap() - von_neumann_entropy(&rho).unwrap()).abs()
}

/// Largest completeness defect of a tensor product and of both complements.
pub fn kraus_completeness_defect(seed: u64) -> f64 {
    let mut r = rng(seed);
    let a = random_channel(&mut r);
    let b = random_channel(&mut r);
    let mut worst = completeness_defect(&a.complementary());
    worst = worst.max(completeness_defect(&b.complementary()));
    if a.d_in() * b.d_in() <= 64 && a.d_out() * b.d_out() <= 64 {
        let ab = tensor(&a, &b).unwrap();
        worst = worst.max(completeness_defect(&ab));
        let abc: Channel = ab.into();
        worst = worst.max(completeness_defect(&abc.complementary()));
    }
    worst
}

/// Largest entrywise deviation between the library partial traces of a random
/// 4×4 two-qubit state and explicit index sums.
pub fn partial_trace_defect(seed: u64) -> f64 {
    let mut r = rng(seed);
    let rho = random_density(4, &mut r).with_dims(vec![2, 2]).unwrap();
    let m = rho.matrix();
    let zero = C64::new(0.0, 0.0);
    let mut keep_a = [[zero; 2]; 2];
    let mut keep_b = [[zero; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                keep_a[i][j] += m[(2 * i + k, 2 * j + k)];
                keep_b[i][j] += m[(2 * k + i, 2 * k + j)];
            }
        }
    }
    let lib_a = partial_trace(&rho, &[0]).unwrap();
    let lib_b = partial_trace(&rho, &[1]).unwrap();
    let mut worst = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            worst = worst.max((lib_a.matrix()[(i, j)] - keep_a[i][j]).norm());
            worst = worst.max((lib_b.matrix()[(i, j)] - keep_b[i][j]).norm());
        }
    }
    worst
}

/// Re-running seeded simulations reproduces them exactly.
pub fn seeded_runs_repeat(seed: u64) -> bool {
    let mut r = rng(seed);
    let d = r.random_range(2..=4);
    let rho = random_density(d, &mut r);
    let ps = ic_projectors(d).unwrap();
    let a = simulate_counts(&rho, &ps, 1000, seed).unwrap();
    let b = simulate_counts(&rho, &ps, 1000, seed).unwrap();
    let ad: Channel = amplitude_damping(r.random_range(0.0..=1.0)).unwrap().into();
    let x = optimize_ci_general(&ad, 2).unwrap();
    let y = optimize_ci_general(&ad, 2).unwrap();
    a == b && x == y
}
