//! Quantum channels in operator-sum and Stinespring form.
//!
//! Isometries are stored as (d_out·d_env) × d_in matrices with the output
//! index major and the environment index minor, so the Kraus operator for
//! environment ket |e⟩ is `K_e[b, a] = G[b·d_env + e, a]`. Going the other
//! way, Kraus operator i is paired with environment ket |i⟩.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{c, re, ComplexMatrix};
use crate::states::{fidelity, partial_trace, DensityMatrix};

const COMPLETENESS_TOL: f64 = 1e-9;
const PRUNE_NORM: f64 = 1e-12;

/// Completely positive trace-preserving map given by Kraus operators.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    ops: Vec<ComplexMatrix>,
    in_dims: Vec<usize>,
    out_dims: Vec<usize>,
}

impl KrausChannel {
    /// Builds a channel from Kraus operators, dropping any with ‖K‖_F < 1e-12.
    pub fn new(ops: Vec<ComplexMatrix>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| Error::InvalidChannel("no Kraus operators".into()))?;
        let (d_out, d_in) = first.shape();
        Self::with_dims(ops, vec![d_in], vec![d_out])
    }

    /// Like [`KrausChannel::new`] but with explicit subsystem labels.
    pub fn with_dims(ops: Vec<ComplexMatrix>, in_dims: Vec<usize>, out_dims: Vec<usize>) -> Result<Self> {
        let d_in: usize = in_dims.iter().product();
        let d_out: usize = out_dims.iter().product();
        if let Some(k) = ops.iter().find(|k| k.shape() != (d_out, d_in)) {
            return Err(Error::InvalidChannel(format!(
                "Kraus operator of shape {:?}, expected {:?}",
                k.shape(),
                (d_out, d_in)
            )));
        }
        let ops: Vec<ComplexMatrix> = ops
            .into_iter()
            .filter(|k| k.frobenius_norm() >= PRUNE_NORM)
            .collect();
        if ops.is_empty() {
            return Err(Error::InvalidChannel("all Kraus operators vanish".into()));
        }
        let mut sum = ComplexMatrix::zeros(d_in, d_in);
        for k in &ops {
            sum = &sum + &k.adjoint().matmul(k);
        }
        let defect = sum.max_abs_diff(&ComplexMatrix::identity(d_in));
        if defect > COMPLETENESS_TOL {
            return Err(Error::InvalidChannel(format!(
                "Kraus completeness violated by {defect:e}"
            )));
        }
        Ok(KrausChannel {
            ops,
            in_dims,
            out_dims,
        })
    }

    pub fn kraus_ops(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    pub fn d_in(&self) -> usize {
        self.in_dims.iter().product()
    }

    pub fn d_out(&self) -> usize {
        self.out_dims.iter().product()
    }

    pub fn in_dims(&self) -> &[usize] {
        &self.in_dims
    }

    pub fn out_dims(&self) -> &[usize] {
        &self.out_dims
    }

    /// Σ Kᵢ X Kᵢ† for an arbitrary (not necessarily Hermitian) operator X.
    pub fn apply_operator(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.d_out(), self.d_out());
        for k in &self.ops {
            out = &out + &k.sandwich(x);
        }
        out
    }

    /// Canonical Stinespring dilation G = Σᵢ Kᵢ ⊗ |i⟩.
    pub fn to_isometry(&self) -> IsometryChannel {
        let d_in = self.d_in();
        let d_out = self.d_out();
        let d_env = self.ops.len();
        let iso = ComplexMatrix::from_fn(d_out * d_env, d_in, |row, a| {
            self.ops[row % d_env][(row / d_env, a)]
        });
        IsometryChannel {
            iso,
            d_in,
            d_out,
            d_env,
        }
    }
}

/// Channel given by an isometry G: a → b ⊗ c, acting as ρ ↦ Tr_c(GρG†).
#[derive(Clone, Debug, PartialEq)]
pub struct IsometryChannel {
    iso: ComplexMatrix,
    d_in: usize,
    d_out: usize,
    d_env: usize,
}

impl IsometryChannel {
    pub fn new(iso: ComplexMatrix, d_out: usize, d_env: usize) -> Result<Self> {
        let d_in = iso.cols();
        if iso.rows() != d_out * d_env {
            return Err(Error::InvalidChannel(format!(
                "isometry has {} rows, expected {}·{}",
                iso.rows(),
                d_out,
                d_env
            )));
        }
        let defect = iso
            .adjoint()
            .matmul(&iso)
            .max_abs_diff(&ComplexMatrix::identity(d_in));
        if defect > COMPLETENESS_TOL {
            return Err(Error::InvalidChannel(format!(
                "G†G deviates from identity by {defect:e}"
            )));
        }
        Ok(IsometryChannel {
            iso,
            d_in,
            d_out,
            d_env,
        })
    }

    pub fn isometry(&self) -> &ComplexMatrix {
        &self.iso
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn d_env(&self) -> usize {
        self.d_env
    }

    /// Kraus operators K_e = (I ⊗ ⟨e|) G, pruned of zero operators.
    pub fn to_kraus(&self) -> KrausChannel {
        let ops = (0..self.d_env)
            .map(|e| {
                ComplexMatrix::from_fn(self.d_out, self.d_in, |b, a| {
                    self.iso[(b * self.d_env + e, a)]
                })
            })
            .collect();
        KrausChannel::new(ops).expect("isometry yields complete Kraus set")
    }

    /// Environment-side channel ρ ↦ Tr_b(GρG†).
    pub fn complementary(&self) -> KrausChannel {
        let ops = (0..self.d_out)
            .map(|b| {
                ComplexMatrix::from_fn(self.d_env, self.d_in, |e, a| {
                    self.iso[(b * self.d_env + e, a)]
                })
            })
            .collect();
        KrausChannel::new(ops).expect("isometry yields complete Kraus set")
    }

    fn apply_state(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let joint = DensityMatrix::from_trusted(
            self.iso.sandwich(rho.matrix()),
            vec![self.d_out, self.d_env],
        );
        partial_trace(&joint, &[0])
    }
}

/// A channel in either representation.
#[derive(Clone, Debug, PartialEq)]
pub enum Channel {
    Kraus(KrausChannel),
    Isometry(IsometryChannel),
}

impl From<KrausChannel> for Channel {
    fn from(k: KrausChannel) -> Self {
        Channel::Kraus(k)
    }
}

impl From<IsometryChannel> for Channel {
    fn from(g: IsometryChannel) -> Self {
        Channel::Isometry(g)
    }
}

impl Channel {
    pub fn d_in(&self) -> usize {
        match self {
            Channel::Kraus(k) => k.d_in(),
            Channel::Isometry(g) => g.d_in,
        }
    }

    pub fn d_out(&self) -> usize {
        match self {
            Channel::Kraus(k) => k.d_out(),
            Channel::Isometry(g) => g.d_out,
        }
    }

    /// Environment dimension of the canonical dilation.
    pub fn d_env(&self) -> usize {
        match self {
            Channel::Kraus(k) => k.ops.len(),
            Channel::Isometry(g) => g.d_env,
        }
    }

    pub fn to_kraus(&self) -> KrausChannel {
        match self {
            Channel::Kraus(k) => k.clone(),
            Channel::Isometry(g) => g.to_kraus(),
        }
    }

    pub fn to_isometry(&self) -> IsometryChannel {
        match self {
            Channel::Kraus(k) => k.to_isometry(),
            Channel::Isometry(g) => g.clone(),
        }
    }

    fn check_input(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.dim() != self.d_in() {
            return Err(Error::DimensionMismatch {
                expected: self.d_in(),
                found: rho.dim(),
            });
        }
        Ok(())
    }

    /// Output state, labelled with the channel's output subsystems.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.check_input(rho)?;
        match self {
            Channel::Kraus(k) => Ok(DensityMatrix::from_trusted(
                k.apply_operator(rho.matrix()),
                k.out_dims.clone(),
            )),
            Channel::Isometry(g) => g.apply_state(rho),
        }
    }

    /// Complementary channel (output ↔ environment of the dilation).
    pub fn complementary(&self) -> KrausChannel {
        match self {
            Channel::Kraus(k) => k.to_isometry().complementary(),
            Channel::Isometry(g) => g.complementary(),
        }
    }

    /// B^c(ρ) directly as the Gram matrix [Tr(Kᵢ ρ Kⱼ†)]ᵢⱼ.
    pub fn apply_complementary(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.check_input(rho)?;
        let kraus = self.to_kraus();
        let ops = kraus.kraus_ops();
        let n = ops.len();
        let rk: Vec<ComplexMatrix> = ops.iter().map(|k| k.matmul(rho.matrix())).collect();
        let env = ComplexMatrix::from_fn(n, n, |i, j| rk[i].trace_product(&ops[j].adjoint()));
        Ok(DensityMatrix::from_trusted(env, vec![n]))
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::Kraus(k) => write!(
                f,
                "Kraus channel {} -> {} ({} operators)",
                k.d_in(),
                k.d_out(),
                k.ops.len()
            ),
            Channel::Isometry(g) => write!(
                f,
                "isometric channel {} -> {} (environment {})",
                g.d_in, g.d_out, g.d_env
            ),
        }
    }
}

/// Platypus channel M_d: G|0⟩ = Σ_{i<d−1} |i⟩|i⟩/√(d−1), G|j⟩ = |d−1⟩|j−1⟩.
pub fn platypus(d: usize) -> Result<IsometryChannel> {
    if d < 3 {
        return Err(Error::out_of_range("d", d as f64, "d >= 3"));
    }
    let d_env = d - 1;
    let mut g = ComplexMatrix::zeros(d * d_env, d);
    let amp = 1.0 / (d_env as f64).sqrt();
    for i in 0..d_env {
        g[(i * d_env + i, 0)] = re(amp);
    }
    for j in 1..d {
        g[((d - 1) * d_env + (j - 1), j)] = re(1.0);
    }
    IsometryChannel::new(g, d, d_env)
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::out_of_range(name, p, "[0, 1]"));
    }
    Ok(())
}

/// Qubit amplitude damping with decay probability γ.
pub fn amplitude_damping(gamma: f64) -> Result<KrausChannel> {
    check_prob("gamma", gamma)?;
    let k0 = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, (1.0 - gamma).sqrt()]]);
    let k1 = ComplexMatrix::from_real_rows(&[&[0.0, gamma.sqrt()], &[0.0, 0.0]]);
    KrausChannel::new(vec![k0, k1])
}

pub fn identity_channel(d: usize) -> Result<KrausChannel> {
    if d == 0 {
        return Err(Error::out_of_range("d", 0.0, "d >= 1"));
    }
    KrausChannel::new(vec![ComplexMatrix::identity(d)])
}

/// Erasure channel: output in dimension d+1, flag |d⟩ with probability p.
pub fn erasure(p: f64, d: usize) -> Result<KrausChannel> {
    check_prob("p", p)?;
    if d < 2 {
        return Err(Error::out_of_range("d", d as f64, "d >= 2"));
    }
    let keep = (1.0 - p).sqrt();
    let mut ops = vec![ComplexMatrix::from_fn(d + 1, d, |i, j| {
        if i == j {
            re(keep)
        } else {
            re(0.0)
        }
    })];
    for j in 0..d {
        let mut k = ComplexMatrix::zeros(d + 1, d);
        k[(d, j)] = re(p.sqrt());
        ops.push(k);
    }
    KrausChannel::new(ops)
}

/// Depolarizing channel (1−p)ρ + p·I/d via weighted generalized Paulis X^a Z^b.
pub fn depolarizing(p: f64, d: usize) -> Result<KrausChannel> {
    check_prob("p", p)?;
    if d < 2 {
        return Err(Error::out_of_range("d", d as f64, "d >= 2"));
    }
    let dd = (d * d) as f64;
    let mut ops = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            let w = if a == 0 && b == 0 {
                1.0 - p + p / dd
            } else {
                p / dd
            };
            let amp = w.sqrt();
            // X^a Z^b |j⟩ = ω^{bj} |j+a⟩
            let k = ComplexMatrix::from_fn(d, d, |row, col| {
                if row == (col + a) % d {
                    let phase = 2.0 * std::f64::consts::PI * (b * col) as f64 / d as f64;
                    c(phase.cos(), phase.sin()) * amp
                } else {
                    re(0.0)
                }
            });
            ops.push(k);
        }
    }
    KrausChannel::new(ops)
}

/// Product channel with Kraus set {Kᵢ ⊗ Lⱼ}, subsystem order [a, b].
pub fn tensor(a: &Channel, b: &Channel) -> Result<KrausChannel> {
    let ka = a.to_kraus();
    let kb = b.to_kraus();
    let mut ops = Vec::with_capacity(ka.ops.len() * kb.ops.len());
    for k in &ka.ops {
        for l in &kb.ops {
            ops.push(k.kron(l)?);
        }
    }
    let in_dims = ka.in_dims.iter().chain(&kb.in_dims).copied().collect();
    let out_dims = ka.out_dims.iter().chain(&kb.out_dims).copied().collect();
    KrausChannel::with_dims(ops, in_dims, out_dims)
}

/// Normalized Choi state (I ⊗ B)(|Φ⁺⟩⟨Φ⁺|) on dims [d_in, d_out].
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiMatrix {
    state: DensityMatrix,
    d_in: usize,
    d_out: usize,
}

impl ChoiMatrix {
    /// Validates the trace-preservation witness Tr_out J = I/d_in within 1e-8.
    pub fn new(state: DensityMatrix, d_in: usize, d_out: usize) -> Result<Self> {
        if state.dim() != d_in * d_out {
            return Err(Error::DimensionMismatch {
                expected: d_in * d_out,
                found: state.dim(),
            });
        }
        let state = state.with_dims(vec![d_in, d_out])?;
        let witness = partial_trace(&state, &[0])?;
        let target = ComplexMatrix::identity(d_in).scale_real(1.0 / d_in as f64);
        let defect = witness.matrix().max_abs_diff(&target);
        if defect > 1e-8 {
            return Err(Error::InvalidChannel(format!(
                "Choi matrix fails trace preservation by {defect:e}"
            )));
        }
        Ok(ChoiMatrix { state, d_in, d_out })
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }
}

pub fn choi(ch: &Channel) -> Result<ChoiMatrix> {
    let d_in = ch.d_in();
    let d_out = ch.d_out();
    let kraus = ch.to_kraus();
    let mut j = ComplexMatrix::zeros(d_in * d_out, d_in * d_out);
    // (I ⊗ B)(|Φ⟩⟨Φ|) = Σᵢⱼ |i⟩⟨j| ⊗ B(|i⟩⟨j|) / d_in
    for i in 0..d_in {
        for jj in 0..d_in {
            let mut eij = ComplexMatrix::zeros(d_in, d_in);
            eij[(i, jj)] = re(1.0 / d_in as f64);
            let block = kraus.apply_operator(&eij);
            for r in 0..d_out {
                for s in 0..d_out {
                    j[(i * d_out + r, jj * d_out + s)] = block[(r, s)];
                }
            }
        }
    }
    ChoiMatrix::new(DensityMatrix::from_trusted(j, vec![d_in, d_out]), d_in, d_out)
}

/// State fidelity between two normalized Choi matrices.
pub fn process_fidelity(a: &ChoiMatrix, b: &ChoiMatrix) -> Result<f64> {
    if (a.d_in, a.d_out) != (b.d_in, b.d_out) {
        return Err(Error::DimensionMismatch {
            expected: a.state.dim(),
            found: b.state.dim(),
        });
    }
    fidelity(&a.state, &b.state)
}

/// Parsed form of a channel spec string such as `tensor(platypus:3,ad:0.5)`.
#[derive(Clone, Debug, PartialEq)]
pub enum ChannelSpec {
    Platypus(usize),
    AmplitudeDamping(f64),
    Identity(usize),
    Erasure { p: f64, d: usize },
    Depolarizing { p: f64, d: usize },
    Tensor(Box<ChannelSpec>, Box<ChannelSpec>),
}

impl ChannelSpec {
    pub fn build(&self) -> Result<Channel> {
        Ok(match self {
            ChannelSpec::Platypus(d) => platypus(*d)?.into(),
            ChannelSpec::AmplitudeDamping(g) => amplitude_damping(*g)?.into(),
            ChannelSpec::Identity(d) => identity_channel(*d)?.into(),
            ChannelSpec::Erasure { p, d } => erasure(*p, *d)?.into(),
            ChannelSpec::Depolarizing { p, d } => depolarizing(*p, *d)?.into(),
            ChannelSpec::Tensor(a, b) => tensor(&a.build()?, &b.build()?)?.into(),
        })
    }
}

impl fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelSpec::Platypus(d) => write!(f, "platypus:{d}"),
            ChannelSpec::AmplitudeDamping(g) => write!(f, "ad:{g}"),
            ChannelSpec::Identity(d) => write!(f, "identity:{d}"),
            ChannelSpec::Erasure { p, d } => write!(f, "erasure:{p},{d}"),
            ChannelSpec::Depolarizing { p, d } => write!(f, "depolarizing:{p},{d}"),
            ChannelSpec::Tensor(a, b) => write!(f, "tensor({a},{b})"),
        }
    }
}

fn parse_num<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("invalid {what} `{s}`")))
}

fn parse_pair(args: &str) -> Result<(f64, usize)> {
    let (p, d) = args
        .split_once(',')
        .ok_or_else(|| Error::Parse(format!("expected `p,d`, got `{args}`")))?;
    Ok((parse_num(p, "probability")?, parse_num(d, "dimension")?))
}

/// Splits `a,b` at the top-level comma that starts the second channel name.
fn split_tensor_args(s: &str) -> Result<(&str, &str)> {
    let mut depth = 0i32;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                let rest = s[i + 1..].trim_start();
                if rest.starts_with(|c: char| c.is_ascii_alphabetic()) {
                    return Ok((&s[..i], &s[i + 1..]));
                }
            }
            _ => {}
        }
    }
    Err(Error::Parse(format!("tensor needs two channels, got `{s}`")))
}

impl FromStr for ChannelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix("tensor(") {
            let inner = inner
                .strip_suffix(')')
                .ok_or_else(|| Error::Parse(format!("unbalanced parentheses in `{s}`")))?;
            let (a, b) = split_tensor_args(inner)?;
            return Ok(ChannelSpec::Tensor(Box::new(a.parse()?), Box::new(b.parse()?)));
        }
        let (name, args) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("expected `name:args`, got `{s}`")))?;
        let spec = match name.trim() {
            "platypus" => ChannelSpec::Platypus(parse_num(args, "dimension")?),
            "ad" => ChannelSpec::AmplitudeDamping(parse_num(args, "gamma")?),
            "identity" => ChannelSpec::Identity(parse_num(args, "dimension")?),
            "erasure" => {
                let (p, d) = parse_pair(args)?;
                ChannelSpec::Erasure { p, d }
            }
            "depolarizing" => {
                let (p, d) = parse_pair(args)?;
                ChannelSpec::Depolarizing { p, d }
            }
            other => return Err(Error::Parse(format!("unknown channel `{other}`"))),
        };
        Ok(spec)
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.parse::<ChannelSpec>()?.build()
    }
}
