//! Channel enhancement for the aligned channel: solve the weighted
//! confidential-rate program at a common-rate floor, certify its first-order
//! conditions, build the enhanced noise covariance, and check each
//! inequality of the converse argument numerically.
//!
//! Multipliers follow the natural-log convention: the derivative of
//! `½ ln|B + N|` is `½ (B + N)⁻¹`. The scalars `μ_k` are base independent,
//! so they multiply rates in bits unchanged.

use serde::Serialize;

use crate::channel::{reduce_rank_deficient_s, AlignedChannel};
use crate::error::{Error, Result};
use crate::linalg::{to_bits, to_nats, Matrix, SymMatrix, PSD_TOL};
use crate::rates;
use crate::sdp::box_grid;

/// Tolerance for certificate residuals.
pub const KKT_TOL: f64 = 1e-6;
/// Rate slack (bits) below which a common-rate constraint counts as active.
pub const ACTIVE_TOL: f64 = 1e-6;
/// Rate slack (bits) below which both multiplier assignments are tried.
pub const AMBIGUOUS_TOL: f64 = 1e-4;
/// Residual above which stationarity is reported unresolved.
pub const UNRESOLVED_TOL: f64 = 1e-4;

const TAU_FINAL: f64 = 1e10;
const INIT_GRID: usize = 21;
const NULL_TOL_HARD: f64 = 1e-9;
const NULL_TOL_SOFT: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedSolution {
    pub b_star: SymMatrix,
    /// Clamped confidential rate at `b_star`, bits.
    pub r1_star: f64,
}

struct Program<'a> {
    ch: &'a AlignedChannel,
    /// Common-rate floor in nats.
    r0: f64,
    /// `½ ln|S + N_k|`.
    cap: [f64; 2],
    basis: Vec<SymMatrix>,
}

/// `tr(G E_a)` and `tr(G E_a G E_b)` over a symmetric basis.
fn trace_terms(g: &SymMatrix, basis: &[SymMatrix]) -> (Vec<f64>, Vec<f64>) {
    let p = basis.len();
    let t = g.dim();
    let w: Vec<Matrix> = basis.iter().map(|e| g.mul(e)).collect();
    let grad: Vec<f64> = basis.iter().map(|e| g.inner(e)).collect();
    let mut hess = vec![0.0; p * p];
    for a in 0..p {
        for b in a..p {
            let mut tr = 0.0;
            for i in 0..t {
                for j in 0..t {
                    tr += w[a].get(i, j) * w[b].get(j, i);
                }
            }
            hess[a * p + b] = tr;
            hess[b * p + a] = tr;
        }
    }
    (grad, hess)
}

fn sym_basis(t: usize) -> Vec<SymMatrix> {
    let mut out = Vec::new();
    for i in 0..t {
        for j in i..t {
            out.push(SymMatrix::from_fn(t, |a, b| if (a == i && b == j) || (a == j && b == i) { 1.0 } else { 0.0 }));
        }
    }
    out
}

fn from_coords(basis: &[SymMatrix], x: &[f64]) -> SymMatrix {
    let t = basis[0].dim();
    let mut b = SymMatrix::zeros(t);
    for (e, v) in basis.iter().zip(x) {
        if *v != 0.0 {
            b = &b + &e.scale(*v);
        }
    }
    b
}

fn to_coords(b: &SymMatrix) -> Vec<f64> {
    let t = b.dim();
    (0..t).flat_map(|i| (i..t).map(move |j| (i, j))).map(|(i, j)| b.get(i, j)).collect()
}

impl<'a> Program<'a> {
    fn new(ch: &'a AlignedChannel, r0_bits: f64) -> Result<Self> {
        let cap = [
            0.5 * (&ch.s + &ch.n1).ln_det()?,
            0.5 * (&ch.s + &ch.n2).ln_det()?,
        ];
        Ok(Program { ch, r0: to_nats(r0_bits), cap, basis: sym_basis(ch.t()) })
    }

    /// Confidential-rate objective in nats.
    fn objective(&self, b: &SymMatrix) -> Option<f64> {
        let a = (b + &self.ch.n1).ln_det().ok()?;
        let c = (b + &self.ch.n2).ln_det().ok()?;
        Some(0.5 * (a - self.ch.n1.ln_det().ok()?) - 0.5 * (c - self.ch.n2.ln_det().ok()?))
    }

    /// Common-rate slacks `g_k(B) − R0` in nats.
    fn slacks(&self, b: &SymMatrix) -> Option<[f64; 2]> {
        let g1 = self.cap[0] - 0.5 * (b + &self.ch.n1).ln_det().ok()?;
        let g2 = self.cap[1] - 0.5 * (b + &self.ch.n2).ln_det().ok()?;
        Some([g1 - self.r0, g2 - self.r0])
    }

    fn feasible(&self, b: &SymMatrix) -> bool {
        b.is_psd(0.0)
            && (&self.ch.s - b).is_psd(0.0)
            && self.slacks(b).map(|s| s[0] >= 0.0 && s[1] >= 0.0).unwrap_or(false)
    }

    fn strictly_interior(&self, b: &SymMatrix) -> bool {
        b.cholesky().is_ok()
            && (&self.ch.s - b).cholesky().is_ok()
            && self.slacks(b).map(|s| s[0] > 0.0 && s[1] > 0.0).unwrap_or(false)
    }

    fn barrier(&self, b: &SymMatrix, tau: f64) -> Option<f64> {
        let s = self.slacks(b)?;
        if !(s[0] > 0.0 && s[1] > 0.0) {
            return None;
        }
        let lb = b.ln_det().ok()?;
        let ls = (&self.ch.s - b).ln_det().ok()?;
        Some(tau * self.objective(b)? + s[0].ln() + s[1].ln() + lb + ls)
    }

    fn barrier_derivatives(&self, b: &SymMatrix, tau: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let p = self.basis.len();
        let s = self.slacks(b)?;
        let g1 = (b + &self.ch.n1).inverse().ok()?;
        let g2 = (b + &self.ch.n2).inverse().ok()?;
        let bi = b.inverse().ok()?;
        let wi = (&self.ch.s - b).inverse().ok()?;
        let (a1, h1) = trace_terms(&g1, &self.basis);
        let (a2, h2) = trace_terms(&g2, &self.basis);
        let (ab, hb) = trace_terms(&bi, &self.basis);
        let (aw, hw) = trace_terms(&wi, &self.basis);
        let mut grad = vec![0.0; p];
        let mut hess = vec![0.0; p * p];
        for a in 0..p {
            // objective
            grad[a] += tau * 0.5 * (a1[a] - a2[a]);
            // slacks u_k with u_k' = −½ tr(G_k E)
            let u1a = -0.5 * a1[a];
            let u2a = -0.5 * a2[a];
            grad[a] += u1a / s[0] + u2a / s[1];
            grad[a] += ab[a] - aw[a];
            for c in 0..p {
                let k = a * p + c;
                hess[k] += tau * 0.5 * (-h1[k] + h2[k]);
                let u1c = -0.5 * a1[c];
                let u2c = -0.5 * a2[c];
                hess[k] += 0.5 * h1[k] / s[0] - u1a * u1c / (s[0] * s[0]);
                hess[k] += 0.5 * h2[k] / s[1] - u2a * u2c / (s[1] * s[1]);
                hess[k] += -hb[k] - hw[k];
            }
        }
        Some((grad, hess))
    }

    /// Damped, eigenvalue-modified Newton ascent on the barrier at `tau`.
    fn center(&self, mut b: SymMatrix, tau: f64) -> SymMatrix {
        let p = self.basis.len();
        for _ in 0..200 {
            let Some((g, h)) = self.barrier_derivatives(&b, tau) else { break };
            let hm = SymMatrix::new(p, h).expect("square");
            let eig = hm.eigen();
            let scale = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let floor = (scale * 1e-14).max(1e-300);
            let mut d = vec![0.0; p];
            for k in 0..p {
                let v = eig.vectors.col(k);
                let proj: f64 = v.iter().zip(&g).map(|(x, y)| x * y).sum();
                let lam = eig.values[k].abs().max(floor);
                for i in 0..p {
                    d[i] += v[i] * proj / lam;
                }
            }
            let decrement: f64 = g.iter().zip(&d).map(|(x, y)| x * y).sum();
            if !(decrement > 1e-20) {
                break;
            }
            let f0 = match self.barrier(&b, tau) {
                Some(v) => v,
                None => break,
            };
            let x = to_coords(&b);
            let mut step = 1.0;
            let mut moved = false;
            for _ in 0..80 {
                let trial: Vec<f64> = x.iter().zip(&d).map(|(u, v)| u + step * v).collect();
                let bt = from_coords(&self.basis, &trial);
                if let Some(f1) = self.barrier(&bt, tau) {
                    if f1 >= f0 + 1e-4 * step * decrement {
                        b = bt;
                        moved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !moved || decrement < 1e-18 {
                break;
            }
        }
        b
    }

    fn path(&self, start: SymMatrix) -> SymMatrix {
        let mut b = start;
        let mut tau = 1.0;
        while tau <= TAU_FINAL {
            b = self.center(b, tau);
            tau *= 10.0;
        }
        b
    }

    /// Strictly feasible `η S` with `η ≤ ½`.
    fn central_point(&self) -> Option<SymMatrix> {
        let s = &self.ch.s;
        let ok = |eta: f64| self.slacks(&s.scale(eta)).map(|v| v[0] > 0.0 && v[1] > 0.0).unwrap_or(false);
        if ok(0.5) {
            return Some(s.scale(0.5));
        }
        let (mut lo, mut hi) = (0.0, 0.5);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let eta = 0.5 * lo;
        (eta > 0.0 && ok(eta)).then(|| s.scale(eta))
    }
}

/// Maximizes the aligned confidential rate subject to both common-rate
/// constraints `½log|S+N_k|/|B+N_k| ≥ r0_target` and `0 ⪯ B ⪯ S`.
///
/// For `t ≤ 2` a grid over the box seeds a log-barrier path-following ascent;
/// for larger `t` the path starts from a scaled copy of `S`. When the optimum
/// value is zero the reported maximizer is `B = 0`.
pub fn solve_weighted_program(ch: &AlignedChannel, r0_target: f64) -> Result<WeightedSolution> {
    let t = ch.t();
    if ch.s.cholesky().is_err() {
        return Err(Error::InvalidInput(
            "S must be positive definite; restrict to range(S) first".into(),
        ));
    }
    let r0_max = rates::r0_max_aligned(&ch.n1, &ch.n2, &ch.s)?;
    if !(r0_target >= 0.0) || r0_target > r0_max + 1e-12 {
        return Err(Error::InvalidInput(format!(
            "common-rate target {r0_target} outside [0, {r0_max}]: feasible set is empty"
        )));
    }
    let zero = SymMatrix::zeros(t);
    if r0_target >= r0_max - 1e-9 {
        return Ok(WeightedSolution { b_star: zero, r1_star: 0.0 });
    }
    let prog = Program::new(ch, r0_target)?;

    let mut starts = Vec::new();
    let center = prog
        .central_point()
        .ok_or_else(|| Error::Internal("no strictly feasible starting point".into()))?;
    if t <= 2 {
        let mut best: Option<(f64, SymMatrix)> = None;
        for b in box_grid(&ch.s, INIT_GRID) {
            if !prog.feasible(&b) {
                continue;
            }
            if let Some(v) = prog.objective(&b) {
                if best.as_ref().map(|(bv, _)| v > *bv).unwrap_or(true) {
                    best = Some((v, b));
                }
            }
        }
        if let Some((_, b)) = best {
            for w in [0.01, 0.05, 0.2, 0.5] {
                let mixed = &b.scale(1.0 - w) + &center.scale(w);
                if prog.strictly_interior(&mixed) {
                    starts.push(mixed);
                    break;
                }
            }
        }
    }
    starts.push(center);

    let mut best: Option<(f64, SymMatrix)> = None;
    for s in starts {
        let b = prog.path(s);
        let v = prog.objective(&b).unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().map(|(bv, _)| v > *bv).unwrap_or(true) {
            best = Some((v, b));
        }
    }
    let (value, b_star) = best.expect("at least one start");
    let value_bits = to_bits(value);
    if value_bits <= 1e-12 {
        return Ok(WeightedSolution { b_star: zero, r1_star: 0.0 });
    }
    Ok(WeightedSolution { b_star, r1_star: value_bits })
}

/// Multiplier assignment that also reached a zero residual.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlternativeAssignment {
    pub mu1: f64,
    pub mu2: f64,
    pub residual: f64,
}

/// First-order certificate for the weighted program. Carries the channel and
/// target so every residual can be recomputed from the fields alone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktCertificate {
    pub n1: SymMatrix,
    pub n2: SymMatrix,
    pub s: SymMatrix,
    /// Common-rate floor, bits.
    pub r0_target: f64,
    pub b_star: SymMatrix,
    pub mu1: f64,
    pub mu2: f64,
    pub m1: SymMatrix,
    pub m2: SymMatrix,
    pub residual_stationarity: f64,
    /// Matrix complementary slackness plus the PSD projection correction.
    pub residual_slackness: f64,
    /// `max_k μ_k |g_k(B*) − R0|`, bits.
    pub residual_complementarity: f64,
    pub alternatives: Vec<AlternativeAssignment>,
}

fn stationarity_matrix(
    b: &SymMatrix,
    n1: &SymMatrix,
    n2: &SymMatrix,
    mu1: f64,
    mu2: f64,
    m1: &SymMatrix,
    m2: &SymMatrix,
) -> Result<SymMatrix> {
    let g1 = (b + n1).inverse()?;
    let g2 = (b + n2).inverse()?;
    // ½G₁ + M₁ − [μ₁/2 G₁ + (μ₂+1)/2 G₂ + M₂]
    Ok(&(&(&g1.scale(0.5 * (1.0 - mu1)) - &g2.scale(0.5 * (mu2 + 1.0))) + m1) - m2)
}

fn frob(m: &Matrix) -> f64 {
    m.frobenius_norm()
}

impl KktCertificate {
    pub fn stationarity_residual(&self) -> Result<f64> {
        Ok(stationarity_matrix(&self.b_star, &self.n1, &self.n2, self.mu1, self.mu2, &self.m1, &self.m2)?.frobenius_norm())
    }

    /// `max(‖B* M₁‖, ‖(S − B*) M₂‖)` in Frobenius norm.
    pub fn slackness_residual(&self) -> f64 {
        let a = frob(&self.b_star.mul(&self.m1));
        let b = frob(&(&self.s - &self.b_star).mul(&self.m2));
        a.max(b)
    }

    /// Common-rate slacks `g_k(B*) − R0` in bits.
    pub fn rate_slacks(&self) -> Result<[f64; 2]> {
        Ok([
            rates::aligned_r0_bound(&self.n1, &self.s, &self.b_star)? - self.r0_target,
            rates::aligned_r0_bound(&self.n2, &self.s, &self.b_star)? - self.r0_target,
        ])
    }

    pub fn complementarity_residual(&self) -> Result<f64> {
        let sl = self.rate_slacks()?;
        Ok((self.mu1 * sl[0].abs()).max(self.mu2 * sl[1].abs()))
    }

    /// Re-asserts every invariant from the stored fields.
    pub fn verify(&self, tol: f64) -> Result<()> {
        let st = self.stationarity_residual()?;
        if st > tol {
            return Err(Error::StationarityUnresolved { residual: st });
        }
        let sl = self.slackness_residual();
        if sl > tol {
            return Err(Error::Enhancement { check: "matrix slackness", violation: sl });
        }
        let cp = self.complementarity_residual()?;
        if cp > tol {
            return Err(Error::Enhancement { check: "multiplier complementarity", violation: cp });
        }
        if self.mu1 < 0.0 || self.mu2 < 0.0 {
            return Err(Error::Enhancement { check: "multiplier sign", violation: -self.mu1.min(self.mu2) });
        }
        let scale = 1.0 + self.m1.max_abs().max(self.m2.max_abs());
        let neg = (-self.m1.min_eigenvalue()).max(-self.m2.min_eigenvalue());
        if neg > PSD_TOL * scale {
            return Err(Error::Enhancement { check: "multiplier matrices PSD", violation: neg });
        }
        Ok(())
    }

    /// Weighted-sum bound `½log|B*+N₁|/|N₁| − ½log|B*+N₂|/|N₂| + Σ μ_k g_k(B*)`
    /// on `R1 + (μ₁ + μ₂) R0`, bits.
    pub fn weighted_sum_bound(&self) -> Result<f64> {
        let w = rates::aligned_wiretap_rate(&self.n1, &self.n2, &self.b_star)?;
        let g1 = rates::aligned_r0_bound(&self.n1, &self.s, &self.b_star)?;
        let g2 = rates::aligned_r0_bound(&self.n2, &self.s, &self.b_star)?;
        Ok(w + self.mu1 * g1 + self.mu2 * g2)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

/// Orthonormal basis (columns) of the eigenvectors of `a` with the `d`
/// smallest eigenvalues.
fn smallest_eigvecs(eig: &crate::linalg::SymEigen, d: usize) -> Matrix {
    let t = eig.values.len();
    let mut p = Matrix::zeros(t, d);
    for c in 0..d {
        for r in 0..t {
            p.set(r, c, eig.vectors.get(r, c));
        }
    }
    p
}

/// Candidate null-space dimensions: every eigenvalue below the hard floor is
/// null; those between the floors may go either way.
fn null_dims(eig: &crate::linalg::SymEigen, scale: f64) -> Vec<usize> {
    let hard = eig.values.iter().filter(|v| **v <= NULL_TOL_HARD * scale).count();
    let soft = eig.values.iter().filter(|v| **v <= NULL_TOL_SOFT * scale).count();
    (hard..=soft).collect()
}

/// Weighted symmetric-to-vector map preserving the Frobenius norm.
fn svec(m: &SymMatrix) -> Vec<f64> {
    let t = m.dim();
    let r2 = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(t * (t + 1) / 2);
    for i in 0..t {
        for j in i..t {
            out.push(if i == j { m.get(i, i) } else { r2 * m.get(i, j) });
        }
    }
    out
}

struct Candidate {
    mu1: f64,
    mu2: f64,
    m1: SymMatrix,
    m2: SymMatrix,
    stationarity: f64,
    slackness: f64,
    active: usize,
    unknowns: usize,
}

/// Fits `(μ_active, X₁, X₂)` with `M_k = P_k X_k P_kᵀ` by minimum-norm least
/// squares, then clamps `μ ≥ 0` and projects `X_k` onto the PSD cone.
fn fit_candidate(
    b: &SymMatrix,
    n1: &SymMatrix,
    n2: &SymMatrix,
    s: &SymMatrix,
    active: [bool; 2],
    p1: &Matrix,
    p2: &Matrix,
) -> Result<Candidate> {
    let t = b.dim();
    let g1 = (b + n1).inverse()?;
    let g2 = (b + n2).inverse()?;
    let rhs: Vec<f64> = svec(&(&g1.scale(-0.5) + &g2.scale(0.5)));
    let mut cols: Vec<Vec<f64>> = Vec::new();
    if active[0] {
        cols.push(svec(&g1.scale(-0.5)));
    }
    if active[1] {
        cols.push(svec(&g2.scale(-0.5)));
    }
    let d1 = p1.cols();
    let d2 = p2.cols();
    let b1 = sym_basis_dim(d1);
    let b2 = sym_basis_dim(d2);
    for e in &b1 {
        cols.push(svec(&p1.sandwich(e)?));
    }
    for e in &b2 {
        cols.push(svec(&p2.sandwich(e)?.scale(-1.0)));
    }
    let n = cols.len();
    let x = if n == 0 {
        Vec::new()
    } else {
        let ata = SymMatrix::from_fn(n, |i, j| cols[i].iter().zip(&cols[j]).map(|(a, c)| a * c).sum());
        let atb: Vec<f64> = cols.iter().map(|c| c.iter().zip(&rhs).map(|(a, v)| a * v).sum()).collect();
        ata.pinv_solve(&atb, 1e-13)
    };
    let mut idx = 0;
    let mut mu = [0.0; 2];
    for k in 0..2 {
        if active[k] {
            mu[k] = x[idx].max(0.0);
            idx += 1;
        }
    }
    let build = |basis: &[SymMatrix], coeffs: &[f64], p: &Matrix, d: usize| -> Result<(SymMatrix, f64)> {
        if d == 0 {
            return Ok((SymMatrix::zeros(t), 0.0));
        }
        let x = from_coords_dim(basis, coeffs, d);
        let proj = x.project_psd();
        let removed = (&x - &proj).frobenius_norm();
        Ok((p.sandwich(&proj)?, removed))
    };
    let (m1, rm1) = build(&b1, &x[idx..idx + b1.len()], p1, d1)?;
    idx += b1.len();
    let (m2, rm2) = build(&b2, &x[idx..idx + b2.len()], p2, d2)?;
    let stationarity = stationarity_matrix(b, n1, n2, mu[0], mu[1], &m1, &m2)?.frobenius_norm();
    let slack = frob(&b.mul(&m1)).max(frob(&(s - b).mul(&m2)));
    Ok(Candidate {
        mu1: mu[0],
        mu2: mu[1],
        m1,
        m2,
        stationarity,
        slackness: slack.max(rm1).max(rm2),
        active: active.iter().filter(|a| **a).count(),
        unknowns: n,
    })
}

fn sym_basis_dim(d: usize) -> Vec<SymMatrix> {
    if d == 0 {
        Vec::new()
    } else {
        sym_basis(d)
    }
}

fn from_coords_dim(basis: &[SymMatrix], x: &[f64], d: usize) -> SymMatrix {
    let mut m = SymMatrix::zeros(d);
    for (e, v) in basis.iter().zip(x) {
        m = &m + &e.scale(*v);
    }
    m
}

/// Certificates at `B* = 0` with a single active common-rate constraint: the
/// smallest `μ_k` making `M₁ = μ₁/2 G₁ + (μ₂+1)/2 G₂ − ½G₁` PSD.
fn zero_point_candidates(n1: &SymMatrix, n2: &SymMatrix, s: &SymMatrix, active: [bool; 2]) -> Result<Vec<Candidate>> {
    let t = n1.dim();
    let zero = SymMatrix::zeros(t);
    let g1 = n1.inverse()?;
    let g2 = n2.inverse()?;
    let mut out = Vec::new();
    let whiten = |g: &SymMatrix, other: &SymMatrix| -> Result<SymMatrix> {
        let r = g.sqrt_psd().inverse()?;
        r.to_matrix().sandwich(other)
    };
    if active[1] {
        // (μ₂ + 1) ≥ λmax(G₂^{-1/2} G₁ G₂^{-1/2})
        let mu2 = (whiten(&g2, &g1)?.max_eigenvalue() - 1.0).max(0.0);
        let m1 = (&g2.scale(0.5 * (mu2 + 1.0)) - &g1.scale(0.5)).project_psd();
        out.push((0.0, mu2, m1));
    }
    if active[0] {
        // (μ₁ − 1) ≥ −λmin(G₁^{-1/2} G₂ G₁^{-1/2})
        let mu1 = (1.0 - whiten(&g1, &g2)?.min_eigenvalue()).max(0.0);
        let m1 = (&g1.scale(0.5 * (mu1 - 1.0)) + &g2.scale(0.5)).project_psd();
        out.push((mu1, 0.0, m1));
    }
    out.into_iter()
        .map(|(mu1, mu2, m1)| {
            let stationarity = stationarity_matrix(&zero, n1, n2, mu1, mu2, &m1, &zero)?.frobenius_norm();
            Ok(Candidate {
                mu1,
                mu2,
                m1,
                m2: SymMatrix::zeros(t),
                stationarity,
                slackness: frob(&s.mul(&SymMatrix::zeros(t))),
                active: 1,
                unknowns: t * (t + 1) / 2 + 1,
            })
        })
        .collect()
}

/// Recovers `(μ₁, μ₂, M₁, M₂)` at a maximizer `b_star`.
///
/// Common-rate constraints with slack below [`AMBIGUOUS_TOL`] may carry a
/// multiplier; `M₁` is restricted to `null(B*)` and `M₂` to `null(S − B*)`.
/// Every assignment is fitted and the lowest residual wins, ties going to the
/// assignment with fewer active multipliers and fewer unknowns.
pub fn recover_kkt(ch: &AlignedChannel, r0_target: f64, b_star: &SymMatrix) -> Result<KktCertificate> {
    let (n1, n2, s) = (&ch.n1, &ch.n2, &ch.s);
    if b_star.dim() != ch.t() {
        return Err(Error::DimensionMismatch {
            op: "recover_kkt",
            left: (b_star.dim(), b_star.dim()),
            right: (ch.t(), ch.t()),
        });
    }
    let slack = [
        rates::aligned_r0_bound(n1, s, b_star)? - r0_target,
        rates::aligned_r0_bound(n2, s, b_star)? - r0_target,
    ];
    let may_be_active = [slack[0] < AMBIGUOUS_TOL, slack[1] < AMBIGUOUS_TOL];
    let scale = s.max_eigenvalue().max(1e-300);
    let eig_b = b_star.eigen();
    let eig_w = (s - b_star).eigen();

    let mut candidates = Vec::new();
    for a1 in [false, true] {
        for a2 in [false, true] {
            if (a1 && !may_be_active[0]) || (a2 && !may_be_active[1]) {
                continue;
            }
            for d1 in null_dims(&eig_b, scale) {
                for d2 in null_dims(&eig_w, scale) {
                    if d1 + d2 > ch.t() && d1 < ch.t() && d2 < ch.t() {
                        // a direction cannot be null for both B* and S − B* when S ≻ 0
                        continue;
                    }
                    let p1 = smallest_eigvecs(&eig_b, d1);
                    let p2 = smallest_eigvecs(&eig_w, d2);
                    candidates.push(fit_candidate(b_star, n1, n2, s, [a1, a2], &p1, &p2)?);
                }
            }
        }
    }
    if b_star.max_abs() <= NULL_TOL_HARD * scale {
        candidates.extend(zero_point_candidates(n1, n2, s, may_be_active)?);
    }

    let score = |c: &Candidate| c.stationarity.max(c.slackness);
    let zero_class = |c: &Candidate| score(c) <= 1e-9;
    candidates.sort_by(|a, b| {
        match (zero_class(a), zero_class(b)) {
            (true, false) => std::cmp::Ordering::Less,
            (false, true) => std::cmp::Ordering::Greater,
            (true, true) => a.active.cmp(&b.active).then(a.unknowns.cmp(&b.unknowns)).then(score(a).total_cmp(&score(b))),
            (false, false) => score(a).total_cmp(&score(b)).then(a.active.cmp(&b.active)),
        }
    });
    let best = candidates
        .first()
        .ok_or_else(|| Error::Internal("no multiplier assignment to fit".into()))?;
    if score(best) > UNRESOLVED_TOL {
        return Err(Error::StationarityUnresolved { residual: score(best) });
    }
    let alternatives = candidates[1..]
        .iter()
        .filter(|c| zero_class(c) && ((c.mu1 - best.mu1).abs() > 1e-9 || (c.mu2 - best.mu2).abs() > 1e-9))
        .map(|c| AlternativeAssignment { mu1: c.mu1, mu2: c.mu2, residual: score(c) })
        .collect();
    let mut cert = KktCertificate {
        n1: n1.clone(),
        n2: n2.clone(),
        s: s.clone(),
        r0_target,
        b_star: b_star.clone(),
        mu1: best.mu1,
        mu2: best.mu2,
        m1: best.m1.clone(),
        m2: best.m2.clone(),
        residual_stationarity: best.stationarity,
        residual_slackness: best.slackness,
        residual_complementarity: 0.0,
        alternatives,
    };
    cert.residual_complementarity = cert.complementarity_residual()?;
    Ok(cert)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnhancedChannel {
    pub n1_tilde: SymMatrix,
    pub source_certificate: KktCertificate,
}

/// Relative Löwner tolerance for noise covariances of scale `n`.
fn loewner_tol(n: &SymMatrix) -> f64 {
    PSD_TOL * n.max_eigenvalue().max(1.0)
}

/// `Ñ₁ = [(B* + N₁)⁻¹ + 2M₁]⁻¹ − B*`, verified to satisfy
/// `0 ≺ Ñ₁ ⪯ N₁`, `Ñ₁ ⪯ N₂` and `|B*+Ñ₁|/|Ñ₁| = |B*+N₁|/|N₁|`.
pub fn construct_enhanced(cert: &KktCertificate, n1: &SymMatrix) -> Result<EnhancedChannel> {
    if n1.dim() != cert.b_star.dim() {
        return Err(Error::DimensionMismatch {
            op: "construct_enhanced",
            left: (n1.dim(), n1.dim()),
            right: (cert.b_star.dim(), cert.b_star.dim()),
        });
    }
    let b = &cert.b_star;
    let inner = &(b + n1).inverse()? + &cert.m1.scale(2.0);
    let n1_tilde = &inner.inverse()? - b;

    let min = n1_tilde.min_eigenvalue();
    if !(min > 0.0) {
        return Err(Error::Enhancement { check: "enhanced noise positive definite", violation: -min });
    }
    let v1 = -(n1 - &n1_tilde).min_eigenvalue();
    if v1 > loewner_tol(n1) {
        return Err(Error::Enhancement { check: "enhanced noise below N1", violation: v1 });
    }
    let v2 = -(&cert.n2 - &n1_tilde).min_eigenvalue();
    if v2 > loewner_tol(&cert.n2) {
        return Err(Error::Enhancement { check: "enhanced noise below N2", violation: v2 });
    }
    let rel = determinant_identity_error(b, &n1_tilde, n1)?;
    if rel > 1e-8 {
        return Err(Error::Enhancement { check: "determinant identity", violation: rel });
    }
    Ok(EnhancedChannel { n1_tilde, source_certificate: cert.clone() })
}

/// Relative mismatch between `|B+Ñ₁|/|Ñ₁|` and `|B+N₁|/|N₁|`.
pub fn determinant_identity_error(b: &SymMatrix, n1_tilde: &SymMatrix, n1: &SymMatrix) -> Result<f64> {
    let lhs = (b + n1_tilde).ln_det()? - n1_tilde.ln_det()?;
    let rhs = (b + n1).ln_det()? - n1.ln_det()?;
    // ratio of determinants, relative
    Ok((lhs - rhs).exp_m1().abs())
}

/// Frobenius residual of `½(B*+Ñ₁)⁻¹ = μ₁/2 (B*+N₁)⁻¹ + (μ₂+1)/2 (B*+N₂)⁻¹ + M₂`.
pub fn enhanced_stationarity_residual(enh: &EnhancedChannel) -> Result<f64> {
    let c = &enh.source_certificate;
    let b = &c.b_star;
    let lhs = (b + &enh.n1_tilde).inverse()?.scale(0.5);
    let rhs = &(&(b + &c.n1).inverse()?.scale(0.5 * c.mu1) + &(b + &c.n2).inverse()?.scale(0.5 * (c.mu2 + 1.0))) + &c.m2;
    Ok((&lhs - &rhs).frobenius_norm())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn at_most(name: &'static str, value: f64, tolerance: f64) -> Self {
        CheckOutcome { name, value, tolerance, passed: value <= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReport {
    pub r0_target: f64,
    /// Dimension after restricting to `range(S)`.
    pub dim: usize,
    pub r1_star: f64,
    pub certificate: KktCertificate,
    pub n1_tilde: SymMatrix,
    pub weighted_bound: f64,
    pub weighted_bound_points: usize,
    /// `max [R1 + (μ₁+μ₂)R0 − bound]` over achievable points (≤ 0 expected).
    pub weighted_bound_excess: f64,
    /// Excess of the point `(R0, R1* + δ)` over the bound.
    pub delta_violation: f64,
    pub eei_points: usize,
    pub eei_max_excess: f64,
    pub eei_equality_gap: f64,
    pub checks: Vec<CheckOutcome>,
}

impl ChainReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Gap used for the contradiction check, bits.
pub const DELTA: f64 = 0.01;

/// Common-rate samples swept for frontier points in the chain check.
pub const FRONTIER_SAMPLES: usize = 11;

/// Frontier `(R0, R1*(R0))` of the aligned region from the weighted program.
pub fn aligned_frontier(ch: &AlignedChannel, samples: usize) -> Result<Vec<rates::RatePair>> {
    let r0_max = rates::r0_max_aligned(&ch.n1, &ch.n2, &ch.s)?;
    let n = samples.max(2);
    (0..n)
        .map(|k| {
            let r0 = r0_max * k as f64 / (n - 1) as f64;
            let sol = solve_weighted_program(ch, r0)?;
            Ok(rates::RatePair::new(r0, sol.r1_star))
        })
        .collect()
}

/// End-to-end enhancement pipeline for `t ≤ 2` with all numerical checks.
pub fn verify_enhancement_chain(ch: &AlignedChannel, r0_target: f64) -> Result<ChainReport> {
    let reduced = reduce_rank_deficient_s(ch)?;
    let ch = &reduced.channel;
    let t = ch.t();
    if t > 2 {
        return Err(Error::Unsupported(format!("grid checks support t <= 2, got t = {t}")));
    }
    let sol = solve_weighted_program(ch, r0_target)?;
    let cert = recover_kkt(ch, r0_target, &sol.b_star)?;
    let enh = construct_enhanced(&cert, &ch.n1)?;
    let mut checks = vec![
        CheckOutcome::at_most("stationarity", cert.residual_stationarity, KKT_TOL),
        CheckOutcome::at_most("matrix slackness", cert.residual_slackness, KKT_TOL),
        CheckOutcome::at_most("multiplier complementarity", cert.residual_complementarity, KKT_TOL),
    ];

    checks.push(CheckOutcome::at_most("enhanced stationarity", enhanced_stationarity_residual(&enh)?, KKT_TOL));
    let ordering = (-enh.n1_tilde.min_eigenvalue())
        .max(-(&ch.n1 - &enh.n1_tilde).min_eigenvalue() - loewner_tol(&ch.n1))
        .max(-(&ch.n2 - &enh.n1_tilde).min_eigenvalue() - loewner_tol(&ch.n2))
        .max(0.0);
    checks.push(CheckOutcome::at_most("noise ordering", ordering, 0.0));
    checks.push(CheckOutcome::at_most(
        "determinant identity",
        determinant_identity_error(&cert.b_star, &enh.n1_tilde, &ch.n1)?,
        1e-8,
    ));

    // weighted-sum bound over achievable points
    let bound = cert.weighted_sum_bound()?;
    let weight = cert.mu1 + cert.mu2;
    let mut points: Vec<rates::RatePair> = aligned_frontier(ch, FRONTIER_SAMPLES)?;
    for b in box_grid(&ch.s, 15) {
        points.push(rates::region_point_aligned(&ch.n1, &ch.n2, &ch.s, &b)?);
    }
    let excess = points.iter().map(|p| p.r1 + weight * p.r0 - bound).fold(f64::NEG_INFINITY, f64::max);
    checks.push(CheckOutcome::at_most("weighted-sum bound", excess, KKT_TOL));
    let delta_violation = (sol.r1_star + DELTA) + weight * r0_target - bound;
    checks.push(CheckOutcome {
        name: "contradiction gap",
        value: delta_violation,
        tolerance: DELTA - 2e-6,
        passed: delta_violation >= DELTA - 2e-6,
    });

    // entropy inequality over a grid of conditional covariances
    let mu = cert.mu1 + cert.mu2 + 1.0;
    let lambda = cert.mu1 / mu;
    let grid = box_grid(&ch.s, 21);
    let mut eei_max = f64::NEG_INFINITY;
    for bx in &grid {
        let c = rates::eei_gaussian_check(&cert.b_star, &enh.n1_tilde, &ch.n1, &ch.n2, &ch.s, mu, lambda, bx)?;
        eei_max = eei_max.max(c.lhs - c.rhs);
    }
    let at = rates::eei_gaussian_check(&cert.b_star, &enh.n1_tilde, &ch.n1, &ch.n2, &ch.s, mu, lambda, &project_into_box(&cert.b_star, &ch.s))?;
    let eq_gap = (at.lhs - at.rhs).abs();
    checks.push(CheckOutcome::at_most("entropy inequality", eei_max, 1e-9));
    checks.push(CheckOutcome::at_most("entropy equality at optimum", eq_gap, 1e-9));

    Ok(ChainReport {
        r0_target,
        dim: t,
        r1_star: sol.r1_star,
        certificate: cert,
        n1_tilde: enh.n1_tilde,
        weighted_bound: bound,
        weighted_bound_points: points.len(),
        weighted_bound_excess: excess,
        delta_violation,
        eei_points: grid.len(),
        eei_max_excess: eei_max,
        eei_equality_gap: eq_gap,
        checks,
    })
}

/// Clips rounding noise so a barrier iterate passes the box test.
fn project_into_box(b: &SymMatrix, s: &SymMatrix) -> SymMatrix {
    let lower = b.project_psd();
    let gap = (s - &lower).project_psd();
    s - &gap
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupersetReport {
    pub points: usize,
    /// Smallest confidential-rate gain of the enhanced channel over the grid.
    pub min_r1_gain: f64,
    /// Largest change of the receiver-1b common-rate bound (zero by construction).
    pub max_r0_change: f64,
    pub passed: bool,
}

/// Compares the confidential-rate term under `(Ñ₁, N₂)` with that under
/// `(N₁, N₂)` at every `B` of a grid in `[0, S]`.
pub fn enhanced_region_superset_check(ch: &AlignedChannel, enhanced: &EnhancedChannel) -> Result<SupersetReport> {
    let grid = box_grid(&ch.s, 10);
    if grid.is_empty() {
        return Err(Error::Unsupported("superset grid supports t <= 2".into()));
    }
    let mut min_gain = f64::INFINITY;
    let mut max_r0_change = 0.0f64;
    for b in &grid {
        let orig = rates::aligned_wiretap_rate(&ch.n1, &ch.n2, b)?;
        let enh = rates::aligned_wiretap_rate(&enhanced.n1_tilde, &ch.n2, b)?;
        min_gain = min_gain.min(enh - orig);
        // receiver 1b keeps N₁
        let r0 = rates::aligned_r0_bound(&ch.n1, &ch.s, b)?;
        let r0_1b = rates::aligned_r0_bound(&enhanced.source_certificate.n1, &ch.s, b)?;
        max_r0_change = max_r0_change.max((r0 - r0_1b).abs());
    }
    Ok(SupersetReport {
        points: grid.len(),
        min_r1_gain: min_gain,
        max_r0_change,
        passed: min_gain >= -1e-9 && max_r0_change <= 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar() -> AlignedChannel {
        AlignedChannel::new(SymMatrix::scalar(1.0), SymMatrix::scalar(2.0), SymMatrix::scalar(3.0)).unwrap()
    }

    fn two_by_two() -> AlignedChannel {
        AlignedChannel::new(
            SymMatrix::from_rows(&[vec![1.0, 0.3], vec![0.3, 0.5]]).unwrap(),
            SymMatrix::from_rows(&[vec![0.6, -0.2], vec![-0.2, 2.0]]).unwrap(),
            SymMatrix::from_rows(&[vec![2.0, 0.4], vec![0.4, 1.0]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn scalar_program_and_certificate() {
        let ch = scalar();
        let sol = solve_weighted_program(&ch, 0.0).unwrap();
        assert!((sol.b_star.get(0, 0) - 3.0).abs() < 1e-6);
        assert!((sol.r1_star - 0.5 * 1.6f64.log2()).abs() < 1e-9);
        let cert = recover_kkt(&ch, 0.0, &sol.b_star).unwrap();
        assert_eq!(cert.mu1, 0.0);
        assert_eq!(cert.mu2, 0.0);
        assert_eq!(cert.m1, SymMatrix::zeros(1));
        // ½·¼ − ½·⅕
        assert!((cert.m2.get(0, 0) - 0.025).abs() < 1e-8);
        cert.verify(KKT_TOL).unwrap();
        let enh = construct_enhanced(&cert, &ch.n1).unwrap();
        assert!((enh.n1_tilde.get(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_noise_reports_zero_covariance() {
        let n = SymMatrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 0.7]]).unwrap();
        let ch = AlignedChannel::new(n.clone(), n, SymMatrix::identity(2)).unwrap();
        let sol = solve_weighted_program(&ch, 0.1).unwrap();
        assert_eq!(sol.b_star, SymMatrix::zeros(2));
        assert_eq!(sol.r1_star, 0.0);
        let report = verify_enhancement_chain(&ch, 0.1).unwrap();
        assert!(report.passed(), "{:?}", report.failures());
        assert!((&report.n1_tilde - &ch.n1).max_abs() < 1e-12);
    }

    #[test]
    fn r0_max_forces_zero() {
        let ch = two_by_two();
        let r0_max = rates::r0_max_aligned(&ch.n1, &ch.n2, &ch.s).unwrap();
        let sol = solve_weighted_program(&ch, r0_max).unwrap();
        assert_eq!(sol.b_star, SymMatrix::zeros(2));
        assert!(solve_weighted_program(&ch, r0_max + 0.01).is_err());
        let cert = recover_kkt(&ch, r0_max, &sol.b_star).unwrap();
        cert.verify(KKT_TOL).unwrap();
    }

    #[test]
    fn interior_optimum_without_multipliers_is_flagged() {
        let ch = two_by_two();
        let b = ch.s.scale(0.5);
        assert!(matches!(recover_kkt(&ch, 0.0, &b), Err(Error::StationarityUnresolved { .. })));
    }

    #[test]
    fn two_by_two_chain_passes() {
        let ch = two_by_two();
        let r0_max = rates::r0_max_aligned(&ch.n1, &ch.n2, &ch.s).unwrap();
        for frac in [0.0, 0.3, 0.7] {
            let report = verify_enhancement_chain(&ch, frac * r0_max).unwrap();
            assert!(report.passed(), "r0 = {}: {:?}", frac * r0_max, report.failures());
        }
    }

    #[test]
    fn certificate_json_has_fields() {
        let ch = scalar();
        let sol = solve_weighted_program(&ch, 0.0).unwrap();
        let cert = recover_kkt(&ch, 0.0, &sol.b_star).unwrap();
        let v: serde_json::Value = serde_json::from_str(&cert.to_json()).unwrap();
        for key in ["b_star", "mu1", "mu2", "m1", "m2", "residual_stationarity", "residual_slackness"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["b_star"][0].as_array().unwrap().len(), 1);
    }

    #[test]
    fn superset_check() {
        let ch = two_by_two();
        let sol = solve_weighted_program(&ch, 0.0).unwrap();
        let cert = recover_kkt(&ch, 0.0, &sol.b_star).unwrap();
        let enh = construct_enhanced(&cert, &ch.n1).unwrap();
        let rep = enhanced_region_superset_check(&ch, &enh).unwrap();
        assert!(rep.passed, "{rep:?}");
        // enhancing a scalar channel strictly helps at B > 0
        let sc = scalar();
        let fake = EnhancedChannel {
            n1_tilde: SymMatrix::scalar(0.5),
            source_certificate: recover_kkt(&sc, 0.0, &SymMatrix::scalar(3.0)).unwrap(),
        };
        let rep = enhanced_region_superset_check(&sc, &fake).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.min_r1_gain, 0.0); // at B = 0
        let b = SymMatrix::scalar(1.0);
        let gain = rates::aligned_wiretap_rate(&fake.n1_tilde, &sc.n2, &b).unwrap()
            - rates::aligned_wiretap_rate(&sc.n1, &sc.n2, &b).unwrap();
        assert!(gain > 0.0);
    }
}
