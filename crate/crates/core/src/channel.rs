//! Channel instances and the transformations between the general model
//! `Y_k = H_k X + Z_k` and the aligned model `Y_k = X + Z_k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymMatrix, PSD_TOL};

/// Relative singular-value floor below which a channel matrix is treated as
/// singular.
pub const INVERTIBILITY_FLOOR: f64 = 1e-10;

/// Relative eigenvalue cutoff used to detect the rank of a power constraint.
pub const RANK_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PowerConstraint {
    /// Input covariance bounded by `S` in the Löwner order.
    Matrix(SymMatrix),
    /// Trace of the input covariance bounded by `P`.
    Total(f64),
}

impl PowerConstraint {
    pub fn matrix(s: SymMatrix) -> Result<Self> {
        if !s.is_psd(PSD_TOL) {
            return Err(Error::InvalidInput("S is not positive semidefinite".into()));
        }
        Ok(PowerConstraint::Matrix(s))
    }

    pub fn total(p: f64) -> Result<Self> {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::InvalidInput(format!("P must be a finite nonnegative number, got {p}")));
        }
        Ok(PowerConstraint::Total(p))
    }

    pub fn as_matrix(&self) -> Option<&SymMatrix> {
        match self {
            PowerConstraint::Matrix(s) => Some(s),
            PowerConstraint::Total(_) => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            PowerConstraint::Matrix(_) => "matrix",
            PowerConstraint::Total(_) => "total",
        }
    }
}

/// A general two-receiver channel `(H₁, H₂)` with its power constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    h1: Matrix,
    h2: Matrix,
    power: PowerConstraint,
}

impl ChannelSpec {
    pub fn new(h1: Matrix, h2: Matrix, power: PowerConstraint) -> Result<Self> {
        if h1.cols() != h2.cols() {
            return Err(Error::DimensionMismatch {
                op: "ChannelSpec::new",
                left: h1.shape(),
                right: h2.shape(),
            });
        }
        match &power {
            PowerConstraint::Matrix(s) => {
                if s.dim() != h1.cols() {
                    return Err(Error::DimensionMismatch {
                        op: "ChannelSpec::new (S)",
                        left: h1.shape(),
                        right: (s.dim(), s.dim()),
                    });
                }
                if !s.is_psd(PSD_TOL) {
                    return Err(Error::InvalidInput("S is not positive semidefinite".into()));
                }
            }
            PowerConstraint::Total(p) => {
                if !(*p >= 0.0) {
                    return Err(Error::InvalidInput("P must be nonnegative".into()));
                }
            }
        }
        Ok(ChannelSpec { h1, h2, power })
    }

    pub fn h1(&self) -> &Matrix {
        &self.h1
    }

    pub fn h2(&self) -> &Matrix {
        &self.h2
    }

    pub fn power(&self) -> &PowerConstraint {
        &self.power
    }

    /// Number of transmit antennas.
    pub fn t(&self) -> usize {
        self.h1.cols()
    }

    pub fn is_single_antenna(&self) -> bool {
        self.h1.rows() == 1 && self.h2.rows() == 1
    }

    pub fn is_square(&self) -> bool {
        self.h1.is_square() && self.h2.is_square()
    }

    pub fn with_power(&self, power: PowerConstraint) -> Result<Self> {
        ChannelSpec::new(self.h1.clone(), self.h2.clone(), power)
    }

    /// The matrix power constraint, or an error for a total-power instance.
    pub fn s(&self) -> Result<&SymMatrix> {
        self.power
            .as_matrix()
            .ok_or_else(|| Error::Unsupported("operation requires a matrix power constraint".into()))
    }
}

/// The aligned channel: noise covariances `N₁, N₂` and matrix constraint `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedChannel {
    pub n1: SymMatrix,
    pub n2: SymMatrix,
    pub s: SymMatrix,
}

impl AlignedChannel {
    pub fn new(n1: SymMatrix, n2: SymMatrix, s: SymMatrix) -> Result<Self> {
        let t = s.dim();
        if n1.dim() != t || n2.dim() != t {
            return Err(Error::DimensionMismatch {
                op: "AlignedChannel::new",
                left: (n1.dim(), n2.dim()),
                right: (t, t),
            });
        }
        for (name, n) in [("N1", &n1), ("N2", &n2)] {
            if n.cholesky().is_err() {
                return Err(Error::NotPositiveDefinite(format!("{name} must be positive definite")));
            }
        }
        if !s.is_psd(PSD_TOL) {
            return Err(Error::InvalidInput("S is not positive semidefinite".into()));
        }
        Ok(AlignedChannel { n1, n2, s })
    }

    pub fn t(&self) -> usize {
        self.s.dim()
    }

    /// A general channel with `H_k = N_k^{-1/2}`, which aligns back to `self`.
    pub fn to_general(&self) -> Result<ChannelSpec> {
        let h1 = self.n1.map_eigenvalues(|l| 1.0 / l.sqrt()).to_matrix();
        let h2 = self.n2.map_eigenvalues(|l| 1.0 / l.sqrt()).to_matrix();
        ChannelSpec::new(h1, h2, PowerConstraint::Matrix(self.s.clone()))
    }
}

fn check_invertible(h: &Matrix, name: &str) -> Result<()> {
    if !h.is_square() {
        return Err(Error::InvalidInput(format!(
            "{name} is {}x{}; squarify the channel first",
            h.rows(),
            h.cols()
        )));
    }
    let sigma = h.svd().sigma;
    let max = sigma[0];
    let min = *sigma.last().expect("nonempty");
    if max == 0.0 || min <= INVERTIBILITY_FLOOR * max {
        return Err(Error::Singular(format!(
            "{name} is not invertible (min singular value {min:e}); perturb the channel first"
        )));
    }
    Ok(())
}

/// Maps a square invertible general channel to its aligned form with
/// `N_k = H_k⁻¹ H_k⁻ᵀ`.
pub fn align(spec: &ChannelSpec) -> Result<AlignedChannel> {
    let s = spec.s()?.clone();
    check_invertible(&spec.h1, "H1")?;
    check_invertible(&spec.h2, "H2")?;
    // N = (HᵀH)⁻¹
    let n1 = spec.h1.gram().inverse()?;
    let n2 = spec.h2.gram().inverse()?;
    AlignedChannel::new(n1, n2, s)
}

/// Replaces each `H_k` by the `t × t` matrix `Λ_k' V_kᵀ`, where `Λ_k'` pads or
/// truncates the singular values to length `t`. The Gram matrices `H_kᵀH_k`,
/// and with them every rate expression, are unchanged.
pub fn squarify(spec: &ChannelSpec) -> ChannelSpec {
    let square = |h: &Matrix| -> Matrix {
        let t = h.cols();
        let svd = h.svd();
        let mut out = Matrix::zeros(t, t);
        for (i, sigma) in svd.sigma.iter().enumerate().take(t) {
            for j in 0..t {
                out.set(i, j, sigma * svd.v.get(j, i));
            }
        }
        out
    };
    ChannelSpec {
        h1: square(&spec.h1),
        h2: square(&spec.h2),
        power: spec.power.clone(),
    }
}

/// Shifts every singular value of each (square) channel matrix by `eps`:
/// `H̄_k = U_k (Λ_k + eps·I) V_kᵀ`.
pub fn perturb(spec: &ChannelSpec, eps: f64) -> Result<ChannelSpec> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("perturbation eps must be positive, got {eps}")));
    }
    if !spec.is_square() {
        return Err(Error::InvalidInput("perturb requires square channel matrices".into()));
    }
    let shift = |h: &Matrix| -> Matrix {
        let svd = h.svd();
        let shifted: Vec<f64> = svd.sigma.iter().map(|s| s + eps).collect();
        svd.u
            .matmul(&Matrix::diag(&shifted))
            .and_then(|m| m.matmul(&svd.v.transpose()))
            .expect("square factors")
    };
    Ok(ChannelSpec {
        h1: shift(&spec.h1),
        h2: shift(&spec.h2),
        power: spec.power.clone(),
    })
}

/// The degradation factor `D = U Λ (Λ + eps·I)⁻¹ Uᵀ` with `H = D H̄`.
pub fn degradation_factor(h: &Matrix, eps: f64) -> Result<Matrix> {
    if !h.is_square() || !(eps > 0.0) {
        return Err(Error::InvalidInput("degradation factor needs a square H and eps > 0".into()));
    }
    let svd = h.svd();
    let ratios: Vec<f64> = svd.sigma.iter().map(|s| s / (s + eps)).collect();
    svd.u.matmul(&Matrix::diag(&ratios))?.matmul(&svd.u.transpose())
}

/// The common-rate-free offset `½log|H̄₂SH̄₂ᵀ+I| − ½log|H₂SH₂ᵀ+I|` bounding how
/// much the perturbed region can exceed the original one.
pub fn gap_region_bound(spec: &ChannelSpec, spec_bar: &ChannelSpec) -> Result<f64> {
    let s = spec.s()?;
    if spec_bar.s()? != s {
        return Err(Error::InvalidInput("gap bound requires both channels to share S".into()));
    }
    let term = |h: &Matrix| -> Result<f64> {
        let g = h.sandwich(s)?;
        let eye = SymMatrix::identity(g.dim());
        Ok(0.5 * (&g + &eye).logdet()?)
    };
    let gap = term(&spec_bar.h2)? - term(&spec.h2)?;
    if gap < -1e-9 {
        return Err(Error::Internal(format!(
            "negative gap {gap:e}: perturbed H2 does not dominate the original"
        )));
    }
    Ok(gap.max(0.0))
}

/// An aligned channel restricted to the range space of a rank-deficient `S`.
#[derive(Debug, Clone)]
pub struct RankReduction {
    pub channel: AlignedChannel,
    /// Orthonormal `t × θ` basis of `range(S)`; the identity when `S` is full rank.
    pub basis: Matrix,
}

impl RankReduction {
    /// Lifts a `θ × θ` covariance back to `basis · B · basisᵀ`.
    pub fn lift(&self, b: &SymMatrix) -> Result<SymMatrix> {
        self.basis.sandwich(b)
    }

    /// Restricts a `t × t` covariance to `basisᵀ · B · basis`.
    pub fn restrict(&self, b: &SymMatrix) -> Result<SymMatrix> {
        self.basis.sandwich_t(b)
    }

    pub fn is_identity(&self) -> bool {
        self.basis.is_square()
    }
}

/// Restricts an aligned channel with singular `S` (rank θ < t) to the range of
/// `S`: the reduced noise covariances are `(Qᵀ N_k⁻¹ Q)⁻¹` and `S' = Qᵀ S Q`.
pub fn reduce_rank_deficient_s(ch: &AlignedChannel) -> Result<RankReduction> {
    let t = ch.t();
    let eig = ch.s.eigen();
    let max = eig.values.iter().fold(0.0f64, |m, v| m.max(*v));
    let keep: Vec<usize> = (0..t).filter(|&k| eig.values[k] > RANK_FLOOR * max && max > 0.0).collect();
    if keep.len() == t {
        return Ok(RankReduction { channel: ch.clone(), basis: Matrix::identity(t) });
    }
    if keep.is_empty() {
        return Err(Error::InvalidInput("S is zero; the region is {(0, 0)}".into()));
    }
    let theta = keep.len();
    let mut basis = Matrix::zeros(t, theta);
    for (c, &k) in keep.iter().enumerate() {
        for r in 0..t {
            basis.set(r, c, eig.vectors.get(r, k));
        }
    }
    let reduce_noise = |n: &SymMatrix| -> Result<SymMatrix> { basis.sandwich_t(&n.inverse()?)?.inverse() };
    let channel = AlignedChannel::new(
        reduce_noise(&ch.n1)?,
        reduce_noise(&ch.n2)?,
        basis.sandwich_t(&ch.s)?,
    )?;
    Ok(RankReduction { channel, basis })
}
