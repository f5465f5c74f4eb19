//! CE-Net and FUS-Net, plus the complex/real reshaping around them.
//!
//! | net     | input | hidden            | output | BN    |
//! |---------|-------|-------------------|--------|-------|
//! | CE-Net  | 2N    | 6N ReLU, 4N ReLU  | 2N lin | input |
//! | FUS-Net | 4N    | 8N ReLU           | 2N lin | input |

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::neuralnet::{Activation, Checkpoint, LayerSpec, Mlp};

/// Default L2 coefficient for both networks.
pub const DEFAULT_L2: f64 = 1e-4;

/// `[Re(v); Im(v)]`.
pub fn complex_to_real(v: &[Complex64]) -> Vec<f64> {
    v.iter().map(|c| c.re).chain(v.iter().map(|c| c.im)).collect()
}

/// Inverse of [`complex_to_real`]: first half real parts, second half
/// imaginary parts.
pub fn real_to_complex(v: &[f64]) -> Result<Vec<Complex64>> {
    if v.len() % 2 != 0 {
        return Err(Error::OddLength(v.len()));
    }
    let (re, im) = v.split_at(v.len() / 2);
    Ok(re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)).collect())
}

/// FUS-Net input `[Re(ŝ_d); Im(ŝ_d); Re(y); Im(y)]`.
pub fn splice_fus_input(s_coarse: &[Complex64], y: &[Complex64]) -> Result<Vec<f64>> {
    check_len("splice: received signal", s_coarse.len(), y.len())?;
    let mut out = complex_to_real(s_coarse);
    out.extend(complex_to_real(y));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    CeNet,
    FusNet,
}

impl Arch {
    pub fn tag(self) -> &'static str {
        match self {
            Self::CeNet => "ce-net",
            Self::FusNet => "fus-net",
        }
    }

    pub fn layer_specs(self, n: usize) -> Vec<LayerSpec> {
        use Activation::{Linear, Relu};
        match self {
            Self::CeNet => vec![
                LayerSpec::new(2 * n, 6 * n, Relu),
                LayerSpec::new(6 * n, 4 * n, Relu),
                LayerSpec::new(4 * n, 2 * n, Linear),
            ],
            Self::FusNet => vec![LayerSpec::new(4 * n, 8 * n, Relu), LayerSpec::new(8 * n, 2 * n, Linear)],
        }
    }
}

/// A network bound to one of the two architectures and a subcarrier count.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    arch: Arch,
    n: usize,
    net: Mlp,
    trained: bool,
}

impl Model {
    pub fn new<R: Rng + ?Sized>(arch: Arch, n: usize, l2: f64, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("subcarrier count must be positive".into()));
        }
        Ok(Self {
            arch,
            n,
            net: Mlp::new(&arch.layer_specs(n), l2, rng)?,
            trained: false,
        })
    }

    /// Wraps an existing network after checking it has the architecture's
    /// exact layer layout.
    pub fn from_net(arch: Arch, n: usize, net: Mlp) -> Result<Self> {
        if net.specs() != arch.layer_specs(n) {
            return Err(Error::Rejected(format!(
                "network layout {:?} does not match {} at N={n}",
                net.specs(),
                arch.tag()
            )));
        }
        Ok(Self { arch, n, net, trained: false })
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    /// Marks the end of the training phase for this network.
    pub fn mark_trained(&mut self) {
        self.trained = true;
    }

    pub fn infer_batch(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.net.infer(inputs)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::new(self.net.clone())
            .with_meta("arch", self.arch.tag())
            .with_meta("n", self.n)
            .with_meta("trained", self.trained)
    }

    pub fn from_checkpoint(ckpt: Checkpoint, expected: Arch) -> Result<Self> {
        let tag = ckpt.meta("arch").unwrap_or("<none>");
        if tag != expected.tag() {
            return Err(Error::Rejected(format!("checkpoint holds `{tag}`, expected `{}`", expected.tag())));
        }
        let n: usize = ckpt
            .meta("n")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Rejected("checkpoint lacks a valid `n` entry".into()))?;
        let trained = ckpt.meta("trained") == Some("true");
        let mut model = Self::from_net(expected, n, ckpt.net)?;
        model.trained = trained;
        Ok(model)
    }
}

/// Channel-estimation network, `2N → 6N → 4N → 2N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CeNet(pub Model);

/// Fusion detection network, `4N → 8N → 2N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusNet(pub Model);

impl CeNet {
    pub fn new<R: Rng + ?Sized>(n: usize, l2: f64, rng: &mut R) -> Result<Self> {
        Model::new(Arch::CeNet, n, l2, rng).map(Self)
    }

    /// Refines an LS estimate: reshape, run the network, reshape back.
    pub fn infer(&self, h_ls: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len("CE-Net input", self.0.n, h_ls.len())?;
        real_to_complex(&self.0.net.infer_one(&complex_to_real(h_ls))?)
    }
}

impl FusNet {
    pub fn new<R: Rng + ?Sized>(n: usize, l2: f64, rng: &mut R) -> Result<Self> {
        Model::new(Arch::FusNet, n, l2, rng).map(Self)
    }

    /// Maps a spliced `4N` input to `N` detected symbols.
    pub fn infer(&self, s_in: &[f64]) -> Result<Vec<Complex64>> {
        check_len("FUS-Net input", 4 * self.0.n, s_in.len())?;
        real_to_complex(&self.0.net.infer_one(s_in)?)
    }
}

impl std::ops::Deref for CeNet {
    type Target = Model;
    fn deref(&self) -> &Model {
        &self.0
    }
}

impl std::ops::DerefMut for CeNet {
    fn deref_mut(&mut self) -> &mut Model {
        &mut self.0
    }
}

impl std::ops::Deref for FusNet {
    type Target = Model;
    fn deref(&self) -> &Model {
        &self.0
    }
}

impl std::ops::DerefMut for FusNet {
    fn deref_mut(&mut self) -> &mut Model {
        &mut self.0
    }
}

/// Parameter and FLOP counts obtained by summing over the actual layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectCount {
    /// `Σ in·out`
    pub dense_weights: u64,
    /// `Σ (in·out + out)`
    pub weights: u64,
    /// `Σ 2·in·out` plus 4 operations per normalized input feature.
    pub flops: u64,
}

/// Direct count for one network.
pub fn count_params_flops(model: &Model) -> DirectCount {
    let specs = model.net().specs();
    let dense_weights: u64 = specs.iter().map(|s| (s.in_dim * s.out_dim) as u64).sum();
    let biases: u64 = specs.iter().map(|s| s.out_dim as u64).sum();
    let bn_ops = if model.net().batch_norm().enabled { 4 * specs[0].in_dim as u64 } else { 0 };
    DirectCount {
        dense_weights,
        weights: dense_weights + biases,
        flops: 2 * dense_weights + bn_ops,
    }
}

/// Direct count for both networks at `n` subcarriers, computed from the
/// layer layout alone.
pub fn count_pair(n: usize) -> DirectCount {
    let count = |arch: Arch| {
        let specs = arch.layer_specs(n);
        let dense: u64 = specs.iter().map(|s| (s.in_dim * s.out_dim) as u64).sum();
        let bias: u64 = specs.iter().map(|s| s.out_dim as u64).sum();
        (dense, bias, 4 * specs[0].in_dim as u64)
    };
    let (d1, b1, bn1) = count(Arch::CeNet);
    let (d2, b2, bn2) = count(Arch::FusNet);
    DirectCount {
        dense_weights: d1 + d2,
        weights: d1 + d2 + b1 + b2,
        flops: 2 * (d1 + d2) + bn1 + bn2,
    }
}

/// Published aggregate for the two networks: weight count `28N² + 8N`.
pub fn reported_weight_count(n: u64) -> u64 {
    28 * n * n + 8 * n
}

/// Published aggregate for the two networks: FLOPs `56N² − 8N`.
pub fn reported_flop_count(n: u64) -> u64 {
    56 * n * n - 8 * n
}
