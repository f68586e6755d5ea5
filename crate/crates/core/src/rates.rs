//! Closed-form rate expressions in bits per channel use.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSpec, PowerConstraint};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymMatrix, PSD_TOL};
use crate::sdp::{self, Cone, FeasibilityProblem, LinearFunctional};

/// A `(R0, R1)` pair: common rate and confidential rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub r0: f64,
    pub r1: f64,
}

impl RatePair {
    pub fn new(r0: f64, r1: f64) -> Self {
        RatePair { r0, r1 }
    }
}

/// Differential entropies of the three Gaussian observations in the enhanced
/// converse: receiver 1a (enhanced), receiver 1b, receiver 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyTriple {
    pub h_y1a: f64,
    pub h_y1b: f64,
    pub h_y2: f64,
}

fn check_box(b: &SymMatrix, s: &SymMatrix) -> Result<()> {
    if b.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            op: "covariance vs S",
            left: (b.dim(), b.dim()),
            right: (s.dim(), s.dim()),
        });
    }
    if !b.is_psd(PSD_TOL) {
        return Err(Error::InvalidInput("B is not positive semidefinite".into()));
    }
    if !(s - b).is_psd(PSD_TOL) {
        return Err(Error::InvalidInput("B exceeds S in the Loewner order".into()));
    }
    Ok(())
}

fn check_psd(b: &SymMatrix, name: &str) -> Result<()> {
    if !b.is_psd(PSD_TOL) {
        return Err(Error::InvalidInput(format!("{name} is not positive semidefinite")));
    }
    Ok(())
}

/// `½ log₂|H B Hᵀ + I|`.
pub fn half_logdet_gain(h: &Matrix, b: &SymMatrix) -> Result<f64> {
    let g = h.sandwich(b)?;
    let eye = SymMatrix::identity(g.dim());
    Ok(0.5 * (&g + &eye).logdet()?)
}

/// `½ log₂ |A + N| / |N|`.
fn half_log_ratio(a: &SymMatrix, n: &SymMatrix) -> Result<f64> {
    Ok(0.5 * ((a + n).logdet()? - n.logdet()?))
}

/// Unclamped wiretap rate `½log₂|H₁BH₁ᵀ+I| − ½log₂|H₂BH₂ᵀ+I|`.
pub fn wiretap_rate(h1: &Matrix, h2: &Matrix, b: &SymMatrix) -> Result<f64> {
    check_psd(b, "B")?;
    Ok(half_logdet_gain(h1, b)? - half_logdet_gain(h2, b)?)
}

/// Region corner for the general channel under `0 ⪯ B ⪯ S`:
///
/// ```text
/// R0 ≤ min_k ½log|H_k S H_kᵀ + I| / |H_k B H_kᵀ + I|
/// R1 ≤ ½log|H₁BH₁ᵀ + I| − ½log|H₂BH₂ᵀ + I|
/// ```
pub fn region_point_general(h1: &Matrix, h2: &Matrix, s: &SymMatrix, b: &SymMatrix) -> Result<RatePair> {
    check_box(b, s)?;
    let r0 = [h1, h2]
        .iter()
        .map(|h| Ok(half_logdet_gain(h, s)? - half_logdet_gain(h, b)?))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let r1 = wiretap_rate(h1, h2, b)?;
    Ok(RatePair::new(r0.max(0.0), r1.max(0.0)))
}

/// Unclamped aligned wiretap term `½log|B+N₁|/|N₁| − ½log|B+N₂|/|N₂|`.
pub fn aligned_wiretap_rate(n1: &SymMatrix, n2: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    Ok(half_log_ratio(b, n1)? - half_log_ratio(b, n2)?)
}

/// Common-rate bound `½log|S+N_k| / |B+N_k|` of receiver `k`.
pub fn aligned_r0_bound(n: &SymMatrix, s: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    Ok(0.5 * ((s + n).logdet()? - (b + n).logdet()?))
}

/// Region corner for the aligned channel `Y_k = X + Z_k`, `Z_k ~ N(0, N_k)`.
pub fn region_point_aligned(n1: &SymMatrix, n2: &SymMatrix, s: &SymMatrix, b: &SymMatrix) -> Result<RatePair> {
    check_box(b, s)?;
    let r0 = aligned_r0_bound(n1, s, b)?.min(aligned_r0_bound(n2, s, b)?);
    let r1 = aligned_wiretap_rate(n1, n2, b)?;
    Ok(RatePair::new(r0.max(0.0), r1.max(0.0)))
}

/// Largest common rate of the aligned channel, reached at `B = 0`.
pub fn r0_max_aligned(n1: &SymMatrix, n2: &SymMatrix, s: &SymMatrix) -> Result<f64> {
    let zero = SymMatrix::zeros(s.dim());
    Ok(aligned_r0_bound(n1, s, &zero)?.min(aligned_r0_bound(n2, s, &zero)?))
}

/// Region corner under a total power budget, with `B₁` carrying the
/// confidential message and `B₁ + B₂` the full input covariance.
pub fn region_point_total_power(h1: &Matrix, h2: &Matrix, b1: &SymMatrix, b2: &SymMatrix) -> Result<RatePair> {
    check_psd(b1, "B1")?;
    check_psd(b2, "B2")?;
    let total = b1 + b2;
    let r0 = [h1, h2]
        .iter()
        .map(|h| Ok(half_logdet_gain(h, &total)? - half_logdet_gain(h, b1)?))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let r1 = wiretap_rate(h1, h2, b1)?;
    Ok(RatePair::new(r0.max(0.0), r1.max(0.0)))
}

/// `½ log₂ |2πe · Cov|`.
pub fn gaussian_entropy(cov: &SymMatrix) -> Result<f64> {
    let t = cov.dim() as f64;
    let logdet = cov
        .logdet()
        .map_err(|_| Error::Singular("covariance must be positive definite".into()))?;
    Ok(0.5 * (t * (2.0 * std::f64::consts::PI * std::f64::consts::E).log2() + logdet))
}

/// Entropies of `X + Z̃₁ₐ`, `X + Z₁_b`, `X + Z₂` for Gaussian `X` with
/// covariance `bx`.
pub fn entropy_triple(bx: &SymMatrix, n1_tilde: &SymMatrix, n1: &SymMatrix, n2: &SymMatrix) -> Result<EntropyTriple> {
    Ok(EntropyTriple {
        h_y1a: gaussian_entropy(&(bx + n1_tilde))?,
        h_y1b: gaussian_entropy(&(bx + n1))?,
        h_y2: gaussian_entropy(&(bx + n2))?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EeiCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn eei_value(e: &EntropyTriple, mu: f64, lambda: f64) -> f64 {
    e.h_y1a - mu * lambda * e.h_y1b - mu * (1.0 - lambda) * e.h_y2
}

/// Gaussian instance of the extremal entropy inequality
///
/// ```text
/// h(X+Z̃₁ₐ) − μλ h(X+Z₁_b) − μ(1−λ) h(X+Z₂)  ≤  same at Cov(X) = B*
/// ```
///
/// for a conditional covariance `0 ⪯ Bx ⪯ S`.
#[allow(clippy::too_many_arguments)]
pub fn eei_gaussian_check(
    b_star: &SymMatrix,
    n1_tilde: &SymMatrix,
    n1: &SymMatrix,
    n2: &SymMatrix,
    s: &SymMatrix,
    mu: f64,
    lambda: f64,
    bx: &SymMatrix,
) -> Result<EeiCheck> {
    check_box(bx, s)?;
    let lhs = eei_value(&entropy_triple(bx, n1_tilde, n1, n2)?, mu, lambda);
    let rhs = eei_value(&entropy_triple(b_star, n1_tilde, n1, n2)?, mu, lambda);
    Ok(EeiCheck { lhs, rhs, holds: lhs <= rhs + 1e-9 })
}

/// Capacity region of the same channel without a secrecy constraint
/// (degraded message sets), for single-antenna receivers. It is the
/// intersection of a sum-rate half-plane and the region
///
/// ```text
/// R0 ≤ ½log(h₂Sh₂ᵀ + 1) − ½log(h₂Bh₂ᵀ + 1),   R1 ≤ ½log(h₁Bh₁ᵀ + 1)
/// ```
///
/// over `0 ⪯ B ⪯ S`, or its `(B₁, B₂)` analogue under a trace budget.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradedMessageSetRegion {
    h1: Vec<f64>,
    h2: Vec<f64>,
    power: PowerConstraint,
}

pub fn degraded_msg_set_regions(spec: &ChannelSpec) -> Result<DegradedMessageSetRegion> {
    if !spec.is_single_antenna() {
        return Err(Error::Unsupported(
            "degraded-message-set regions are evaluated for single receive antennas only".into(),
        ));
    }
    Ok(DegradedMessageSetRegion {
        h1: spec.h1().row(0).to_vec(),
        h2: spec.h2().row(0).to_vec(),
        power: spec.power().clone(),
    })
}

fn gain(h: &[f64], b: &SymMatrix) -> f64 {
    b.quad_form(h)
}

fn norm_sq(h: &[f64]) -> f64 {
    h.iter().map(|v| v * v).sum()
}

impl DegradedMessageSetRegion {
    pub fn power(&self) -> &PowerConstraint {
        &self.power
    }

    /// Receiver-1 sum-rate cap `½log₂(h₁Sh₁ᵀ+1)` or `½log₂(P‖h₁‖²+1)`.
    pub fn sum_rate_cap(&self) -> f64 {
        let snr = match &self.power {
            PowerConstraint::Matrix(s) => gain(&self.h1, s),
            PowerConstraint::Total(p) => p * norm_sq(&self.h1),
        };
        0.5 * (snr + 1.0).log2()
    }

    /// Largest common rate of the second region, reached with `B = 0`.
    pub fn r0_cap(&self) -> f64 {
        let snr = match &self.power {
            PowerConstraint::Matrix(s) => gain(&self.h2, s),
            PowerConstraint::Total(p) => p * norm_sq(&self.h2),
        };
        0.5 * (snr + 1.0).log2()
    }

    /// Second-region corner at a matrix-power covariance `B`.
    pub fn r2_point(&self, b: &SymMatrix) -> Result<RatePair> {
        let s = match &self.power {
            PowerConstraint::Matrix(s) => s,
            PowerConstraint::Total(_) => return Err(Error::Unsupported("r2_point needs a matrix constraint".into())),
        };
        check_box(b, s)?;
        let r0 = 0.5 * ((gain(&self.h2, s) + 1.0) / (gain(&self.h2, b) + 1.0)).log2();
        let r1 = 0.5 * (gain(&self.h1, b) + 1.0).log2();
        Ok(RatePair::new(r0.max(0.0), r1.max(0.0)))
    }

    /// Second-region corner at a total-power split `(B₁, B₂)`.
    pub fn r2_point_total(&self, b1: &SymMatrix, b2: &SymMatrix) -> Result<RatePair> {
        check_psd(b1, "B1")?;
        check_psd(b2, "B2")?;
        let total = b1 + b2;
        let r0 = 0.5 * ((gain(&self.h2, &total) + 1.0) / (gain(&self.h2, b1) + 1.0)).log2();
        let r1 = 0.5 * (gain(&self.h1, b1) + 1.0).log2();
        Ok(RatePair::new(r0.max(0.0), r1.max(0.0)))
    }

    /// Linear feasibility problem whose solutions are covariances achieving
    /// `(R0, R1)` in the second region.
    pub fn r2_problem(&self, pair: RatePair) -> Result<FeasibilityProblem> {
        if !(pair.r0 >= 0.0 && pair.r1 >= 0.0) {
            return Err(Error::InvalidInput("rates must be nonnegative".into()));
        }
        let t = self.h1.len();
        let q1 = SymMatrix::outer(&self.h1);
        let q2 = SymMatrix::outer(&self.h2);
        let a0 = (2.0 * pair.r0).exp2();
        let a1 = (2.0 * pair.r1).exp2() - 1.0;
        match &self.power {
            PowerConstraint::Matrix(s) => {
                let rows = vec![
                    LinearFunctional::single(q2.scale(-1.0), (gain(&self.h2, s) + 1.0) / a0 - 1.0),
                    LinearFunctional::single(q1, -a1),
                ];
                FeasibilityProblem::new(t, rows, Cone::Box(s.clone()))
            }
            PowerConstraint::Total(p) => {
                let rows = vec![
                    LinearFunctional { coeffs: vec![q2.scale(-(a0 - 1.0)), q2], offset: -(a0 - 1.0) },
                    LinearFunctional { coeffs: vec![q1, SymMatrix::zeros(t)], offset: -a1 },
                ];
                FeasibilityProblem::new(t, rows, Cone::TracePair(*p))
            }
        }
    }

    /// Largest `R1` of the second region at common rate `r0`, by bisection on
    /// the feasibility of [`Self::r2_problem`] to within `tol` bits.
    pub fn max_r1_in_r2(&self, r0: f64, tol: f64) -> Result<f64> {
        if r0 > self.r0_cap() + 1e-12 {
            return Err(Error::InvalidInput(format!(
                "common rate {r0} exceeds the cap {}",
                self.r0_cap()
            )));
        }
        let r0 = r0.min(self.r0_cap());
        let feasible = |r1: f64| -> Result<bool> { Ok(sdp::solve(&self.r2_problem(RatePair::new(r0, r1))?).is_feasible()) };
        let mut lo = 0.0;
        let mut hi = self.sum_rate_cap();
        if feasible(hi)? {
            return Ok(hi);
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if feasible(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// Largest `R1` of the full non-secrecy region at common rate `r0`.
    pub fn max_r1(&self, r0: f64, tol: f64) -> Result<f64> {
        let r2 = self.max_r1_in_r2(r0, tol)?;
        Ok(r2.min(self.sum_rate_cap() - r0).max(0.0))
    }

    /// Membership with `tol` bits of slack.
    pub fn contains(&self, pair: RatePair, tol: f64) -> Result<bool> {
        if pair.r0 < -tol || pair.r1 < -tol {
            return Ok(false);
        }
        if pair.r0 + pair.r1 > self.sum_rate_cap() + tol || pair.r0 > self.r0_cap() + tol {
            return Ok(false);
        }
        let r0 = pair.r0.clamp(0.0, self.r0_cap());
        Ok(pair.r1 <= self.max_r1_in_r2(r0, tol.min(1e-7))? + tol)
    }
}
