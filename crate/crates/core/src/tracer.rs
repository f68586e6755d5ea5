//! Boundary tracing through the `(α, γ₀)` parameterization
//!
//! ```text
//! R0 = ½log₂(1 + αγ₀),   R1 = ½log₂(1 + α(1 − γ₀))
//! ```
//!
//! For fixed `γ₀` the feasible `α` form an interval `[0, α*]`, so each
//! boundary point is one bisection over feasibility problems.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{AlignedChannel, ChannelSpec, PowerConstraint};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymMatrix};
use crate::rates;
use crate::sdp::{self, box_grid, FeasibilityProblem, Status};

#[derive(Debug, Clone, PartialEq)]
pub struct TraceConfig {
    pub gamma0_samples: usize,
    pub alpha_bisect_tol: f64,
    /// Initial upper bracket for `α`; derived from the channel when `None`.
    pub alpha_upper_seed: Option<f64>,
    pub keep_witnesses: bool,
    pub parallel: bool,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            gamma0_samples: 201,
            alpha_bisect_tol: 1e-6,
            alpha_upper_seed: None,
            keep_witnesses: false,
            parallel: true,
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma0_samples < 2 {
            return Err(Error::InvalidInput(format!(
                "gamma0_samples must be at least 2, got {}",
                self.gamma0_samples
            )));
        }
        if !(self.alpha_bisect_tol > 0.0) || !self.alpha_bisect_tol.is_finite() {
            return Err(Error::InvalidInput(format!(
                "alpha tolerance must be positive, got {}",
                self.alpha_bisect_tol
            )));
        }
        if let Some(seed) = self.alpha_upper_seed {
            if !(seed > 0.0) || !seed.is_finite() {
                return Err(Error::InvalidInput(format!("alpha upper seed must be positive, got {seed}")));
            }
        }
        Ok(())
    }

    pub fn gamma0_grid(&self) -> Vec<f64> {
        let n = self.gamma0_samples;
        (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintKind {
    MatrixPower,
    TotalPower,
}

impl ConstraintKind {
    pub fn of(power: &PowerConstraint) -> Self {
        match power {
            PowerConstraint::Matrix(_) => ConstraintKind::MatrixPower,
            PowerConstraint::Total(_) => ConstraintKind::TotalPower,
        }
    }
}

/// Input covariance achieving a boundary point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Witness {
    /// `B` under a matrix constraint.
    Matrix(SymMatrix),
    /// `(B₁, B₂)` under a trace budget.
    Pair(SymMatrix, SymMatrix),
}

impl Witness {
    fn from_solution(w: &[SymMatrix]) -> Self {
        match w {
            [b] => Witness::Matrix(b.clone()),
            [b1, b2] => Witness::Pair(b1.clone(), b2.clone()),
            _ => unreachable!("one or two unknowns"),
        }
    }

    fn zero(kind: ConstraintKind, t: usize) -> Self {
        match kind {
            ConstraintKind::MatrixPower => Witness::Matrix(SymMatrix::zeros(t)),
            ConstraintKind::TotalPower => Witness::Pair(SymMatrix::zeros(t), SymMatrix::zeros(t)),
        }
    }

    /// Covariance carrying the confidential message.
    pub fn confidential(&self) -> &SymMatrix {
        match self {
            Witness::Matrix(b) | Witness::Pair(b, _) => b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub gamma0: f64,
    pub alpha: f64,
    pub r0: f64,
    pub r1: f64,
}

impl BoundaryPoint {
    pub fn from_alpha(gamma0: f64, alpha: f64) -> Self {
        BoundaryPoint {
            gamma0,
            alpha,
            r0: 0.5 * (alpha * gamma0).ln_1p() / std::f64::consts::LN_2,
            r1: 0.5 * (alpha * (1.0 - gamma0)).ln_1p() / std::f64::consts::LN_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionBoundary {
    pub points: Vec<BoundaryPoint>,
    pub constraint_kind: ConstraintKind,
    pub witnesses: Option<Vec<Witness>>,
}

impl RegionBoundary {
    /// Points sorted by increasing common rate.
    pub fn by_r0(&self) -> Vec<BoundaryPoint> {
        let mut pts = self.points.clone();
        pts.sort_by(|a, b| a.r0.total_cmp(&b.r0).then(b.r1.total_cmp(&a.r1)));
        pts
    }
}

fn single_antenna_vectors(spec: &ChannelSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    if !spec.is_single_antenna() {
        return Err(Error::Unsupported(
            "exact boundary tracing needs single-antenna receivers (H_k of shape 1 x t)".into(),
        ));
    }
    Ok((spec.h1().row(0).to_vec(), spec.h2().row(0).to_vec()))
}

/// Feasibility problem of the boundary test at `(alpha, gamma0)`.
pub fn boundary_problem(
    h1: &[f64],
    h2: &[f64],
    power: &PowerConstraint,
    alpha: f64,
    gamma0: f64,
) -> Result<FeasibilityProblem> {
    match power {
        PowerConstraint::Matrix(s) => sdp::build_matrix_power_problem(h1, h2, s, alpha, gamma0),
        PowerConstraint::Total(p) => sdp::build_total_power_problem(h1, h2, *p, alpha, gamma0),
    }
}

/// Receiver-1 SNR cap `h₁Sh₁ᵀ` or `P‖h₁‖²`, the default bracket seed.
fn snr_cap(h1: &[f64], power: &PowerConstraint) -> f64 {
    match power {
        PowerConstraint::Matrix(s) => s.quad_form(h1),
        PowerConstraint::Total(p) => p * h1.iter().map(|v| v * v).sum::<f64>(),
    }
}

enum Probe {
    Feasible(Witness),
    Infeasible,
    Undecided,
}

fn probe(h1: &[f64], h2: &[f64], power: &PowerConstraint, alpha: f64, gamma0: f64) -> Result<Probe> {
    let problem = boundary_problem(h1, h2, power, alpha, gamma0)?;
    let result = sdp::solve(&problem);
    Ok(match result.status {
        Status::Feasible(w) => Probe::Feasible(Witness::from_solution(&w)),
        Status::Infeasible => Probe::Infeasible,
        Status::Undecided => Probe::Undecided,
    })
}

/// Largest `α` for which the boundary test at `gamma0` is feasible, found by
/// bisection to `cfg.alpha_bisect_tol`, with the witness at that `α`.
///
/// A phase-1 result inside the dead band is treated as infeasible when the
/// bracket is already narrow; inside a wide bracket it is reported as
/// [`Error::Undecided`].
pub fn max_alpha(
    h1: &[f64],
    h2: &[f64],
    power: &PowerConstraint,
    gamma0: f64,
    cfg: &TraceConfig,
) -> Result<(f64, Witness)> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&gamma0) {
        return Err(Error::InvalidInput(format!("gamma0 must lie in [0, 1], got {gamma0}")));
    }
    let kind = ConstraintKind::of(power);
    let t = h1.len();
    let mut lo = 0.0;
    let mut witness = Witness::zero(kind, t);

    let seed = cfg.alpha_upper_seed.unwrap_or_else(|| snr_cap(h1, power)).max(1.0);
    let mut hi = seed;
    let mut doublings = 0;
    loop {
        match probe(h1, h2, power, hi, gamma0)? {
            Probe::Feasible(w) => {
                lo = hi;
                witness = w;
                hi *= 2.0;
                doublings += 1;
                if doublings > 64 {
                    return Err(Error::Internal(format!("alpha unbounded at gamma0 = {gamma0}")));
                }
            }
            Probe::Infeasible | Probe::Undecided => break,
        }
    }

    while hi - lo > cfg.alpha_bisect_tol {
        let mid = 0.5 * (lo + hi);
        match probe(h1, h2, power, mid, gamma0)? {
            Probe::Feasible(w) => {
                lo = mid;
                witness = w;
            }
            Probe::Infeasible => hi = mid,
            Probe::Undecided => {
                if mid - lo > 1e-3 * (1.0 + mid) {
                    return Err(Error::Undecided {
                        lo,
                        hi: mid,
                        context: Some(format!("gamma0 = {gamma0}")),
                    });
                }
                hi = mid;
            }
        }
    }
    Ok((lo, witness))
}

/// Sweeps `γ₀` uniformly over `[0, 1]` and bisects `α` at each sample.
pub fn trace_boundary(spec: &ChannelSpec, cfg: &TraceConfig) -> Result<RegionBoundary> {
    cfg.validate()?;
    let (h1, h2) = single_antenna_vectors(spec)?;
    let power = spec.power();
    let grid = cfg.gamma0_grid();
    let one = |&g: &f64| -> Result<(BoundaryPoint, Witness)> {
        let (alpha, w) = max_alpha(&h1, &h2, power, g, cfg).map_err(|e| match e {
            Error::Undecided { lo, hi, .. } => Error::Undecided { lo, hi, context: Some(format!("gamma0 = {g}")) },
            other => other,
        })?;
        Ok((BoundaryPoint::from_alpha(g, alpha), w))
    };
    let results: Vec<Result<(BoundaryPoint, Witness)>> = if cfg.parallel {
        grid.par_iter().map(one).collect()
    } else {
        grid.iter().map(one).collect()
    };
    let mut points = Vec::with_capacity(grid.len());
    let mut witnesses = Vec::with_capacity(grid.len());
    for r in results {
        let (p, w) = r?;
        points.push(p);
        witnesses.push(w);
    }
    Ok(RegionBoundary {
        points,
        constraint_kind: ConstraintKind::of(power),
        witnesses: cfg.keep_witnesses.then_some(witnesses),
    })
}

/// Largest confidential rate at a fixed common rate `r0`, by bisection on
/// `R1` to `tol` bits. Returns `None` when `r0` exceeds the common-rate cap.
pub fn max_r1_at_r0(spec: &ChannelSpec, r0: f64, tol: f64) -> Result<Option<f64>> {
    let (h1, h2) = single_antenna_vectors(spec)?;
    let power = spec.power();
    if !(r0 >= 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidInput("r0 must be >= 0 and tol > 0".into()));
    }
    let c0 = (2.0 * r0).exp2() - 1.0;
    let feasible = |r1: f64| -> Result<bool> {
        let c1 = (2.0 * r1).exp2() - 1.0;
        let alpha = c0 + c1;
        let gamma0 = if alpha > 0.0 { c0 / alpha } else { 0.0 };
        let problem = boundary_problem(&h1, &h2, power, alpha, gamma0)?;
        Ok(sdp::solve(&problem).is_feasible())
    };
    if !feasible(0.0)? {
        return Ok(None);
    }
    let mut lo = 0.0;
    let mut hi = 0.5 * (snr_cap(&h1, power) + 1.0).log2();
    if feasible(hi)? {
        return Ok(Some(hi));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Secrecy capacity with no common message and the covariance achieving it.
///
/// Single-antenna receivers use the `γ₀ = 0` bisection; other channels with
/// `t ≤ 2` use a grid scan followed by local refinement.
pub fn wiretap_capacity(spec: &ChannelSpec, cfg: &TraceConfig) -> Result<(f64, Witness)> {
    if spec.is_single_antenna() {
        let (h1, h2) = single_antenna_vectors(spec)?;
        let (alpha, w) = max_alpha(&h1, &h2, spec.power(), 0.0, cfg)?;
        return Ok((0.5 * alpha.ln_1p() / std::f64::consts::LN_2, w));
    }
    let t = spec.t();
    if t > 2 {
        return Err(Error::Unsupported(format!(
            "wiretap search for multi-antenna receivers supports t <= 2, got t = {t}"
        )));
    }
    let (h1, h2) = (spec.h1().clone(), spec.h2().clone());
    let f = move |b: &SymMatrix| rates::wiretap_rate(&h1, &h2, b).unwrap_or(f64::NEG_INFINITY);
    let (value, b) = match spec.power() {
        PowerConstraint::Matrix(s) => grid_then_refine(&f, &BoxSet::Loewner(s.clone()), 61),
        PowerConstraint::Total(p) => grid_then_refine(&f, &BoxSet::Trace(*p), 61),
    };
    let zero = SymMatrix::zeros(t);
    if value <= 0.0 {
        return Ok((0.0, Witness::Matrix(zero)));
    }
    Ok((value, Witness::Matrix(b)))
}

/// Wiretap capacity of an aligned channel with `t ≤ 2` (grid then refine).
pub fn wiretap_capacity_aligned(ch: &AlignedChannel) -> Result<(f64, SymMatrix)> {
    if ch.t() > 2 {
        return Err(Error::Unsupported(format!("aligned wiretap search supports t <= 2, got {}", ch.t())));
    }
    let (n1, n2) = (ch.n1.clone(), ch.n2.clone());
    let f = move |b: &SymMatrix| rates::aligned_wiretap_rate(&n1, &n2, b).unwrap_or(f64::NEG_INFINITY);
    let (value, b) = grid_then_refine(&f, &BoxSet::Loewner(ch.s.clone()), 61);
    if value <= 0.0 {
        return Ok((0.0, SymMatrix::zeros(ch.t())));
    }
    Ok((value, b))
}

/// Admissible covariances for a single `t ≤ 2` unknown.
#[derive(Debug, Clone)]
pub enum BoxSet {
    Loewner(SymMatrix),
    Trace(f64),
}

impl BoxSet {
    pub fn contains(&self, b: &SymMatrix) -> bool {
        match self {
            BoxSet::Loewner(s) => b.is_psd(1e-12) && (s - b).is_psd(1e-12),
            BoxSet::Trace(p) => b.is_psd(1e-12) && b.trace() <= p + 1e-12,
        }
    }

    fn grid(&self, t: usize, n: usize) -> Vec<SymMatrix> {
        match self {
            BoxSet::Loewner(s) => box_grid(s, n),
            BoxSet::Trace(p) => {
                let mut out = Vec::new();
                let lin = |hi: f64| (0..n).map(move |k| hi * k as f64 / (n - 1) as f64);
                if t == 1 {
                    out.extend(lin(*p).map(SymMatrix::scalar));
                } else {
                    for b11 in lin(*p) {
                        for b22 in lin((p - b11).max(0.0)) {
                            let r = (b11 * b22).sqrt();
                            for k in 0..n {
                                let b12 = -r + 2.0 * r * k as f64 / (n - 1) as f64;
                                out.push(SymMatrix::new(2, vec![b11, b12, b12, b22]).expect("2x2"));
                            }
                        }
                    }
                }
                out
            }
        }
    }

    fn scale(&self) -> f64 {
        match self {
            BoxSet::Loewner(s) => s.max_eigenvalue().max(1e-300),
            BoxSet::Trace(p) => p.max(1e-300),
        }
    }
}

/// Maximizes `f` over a `t ≤ 2` set: best point of a dense grid, then
/// coordinate pattern search with step halving, keeping every iterate inside
/// the set.
pub fn grid_then_refine(f: &dyn Fn(&SymMatrix) -> f64, set: &BoxSet, grid_n: usize) -> (f64, SymMatrix) {
    let t = match set {
        BoxSet::Loewner(s) => s.dim(),
        BoxSet::Trace(_) => 0,
    };
    let t = if t == 0 { 2 } else { t };
    grid_then_refine_dim(f, set, t, grid_n)
}

pub fn grid_then_refine_dim(
    f: &dyn Fn(&SymMatrix) -> f64,
    set: &BoxSet,
    t: usize,
    grid_n: usize,
) -> (f64, SymMatrix) {
    let mut best = SymMatrix::zeros(t);
    let mut best_v = f(&best);
    for b in set.grid(t, grid_n) {
        let v = f(&b);
        if v > best_v {
            best_v = v;
            best = b;
        }
    }
    refine(f, set, best, best_v)
}

/// Pattern search over the symmetric coordinates of `b` inside `set`.
pub fn refine(f: &dyn Fn(&SymMatrix) -> f64, set: &BoxSet, mut b: SymMatrix, mut v: f64) -> (f64, SymMatrix) {
    let t = b.dim();
    let dirs: Vec<SymMatrix> = (0..t)
        .flat_map(|i| (i..t).map(move |j| (i, j)))
        .map(|(i, j)| SymMatrix::from_fn(t, |a, c| if (a == i && c == j) || (a == j && c == i) { 1.0 } else { 0.0 }))
        .collect();
    let mut step = set.scale() * 0.05;
    let floor = set.scale() * 1e-13;
    while step > floor {
        let mut improved = false;
        for d in &dirs {
            for sign in [1.0, -1.0] {
                let trial = &b + &d.scale(sign * step);
                if !set.contains(&trial) {
                    continue;
                }
                let tv = f(&trial);
                if tv > v {
                    b = trial;
                    v = tv;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (v, b)
}

/// Outcome of comparing matrix-power boundaries against a total-power one.
#[derive(Debug, Clone, Serialize)]
pub struct UnionReport {
    /// Smallest slack (bits) per sampled `S`; negative means a violation.
    pub min_slack: Vec<f64>,
    pub max_violation: f64,
    pub contained: bool,
}

/// Checks that the boundary under every sampled `S` with `Tr(S) ≤ P` lies
/// inside the directly traced total-power region. Points are compared along
/// matching `γ₀` rays, where containment means `α_S ≤ α_P`; the slack is the
/// larger of the two coordinate gaps, in bits.
pub fn union_over_s_check(spec_total: &ChannelSpec, sampled_s: &[SymMatrix], cfg: &TraceConfig) -> Result<UnionReport> {
    let p = match spec_total.power() {
        PowerConstraint::Total(p) => *p,
        PowerConstraint::Matrix(_) => {
            return Err(Error::InvalidInput("union check needs a total-power channel".into()))
        }
    };
    let total = trace_boundary(spec_total, cfg)?;
    let mut min_slack = Vec::with_capacity(sampled_s.len());
    for s in sampled_s {
        if s.trace() > p * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::InvalidInput(format!("sampled S has trace {} above P = {p}", s.trace())));
        }
        let spec_s = spec_total.with_power(PowerConstraint::matrix(s.clone())?)?;
        let inner = trace_boundary(&spec_s, cfg)?;
        let slack = inner
            .points
            .iter()
            .zip(&total.points)
            .map(|(a, b)| (b.r0 - a.r0).max(b.r1 - a.r1))
            .fold(f64::INFINITY, f64::min);
        min_slack.push(slack);
    }
    let worst = min_slack.iter().copied().fold(f64::INFINITY, f64::min);
    let max_violation = if worst.is_finite() { (-worst).max(0.0) } else { 0.0 };
    Ok(UnionReport { min_slack, max_violation, contained: max_violation <= 1e-6 })
}

/// Brute-force frontier of the matrix-power region of a `t ≤ 2` channel from
/// region corners at every `B` of a `grid_n`-per-parameter grid.
#[derive(Debug, Clone)]
pub struct GridFrontier {
    /// Corners sorted by decreasing `R0`, with `R1` replaced by its running
    /// maximum.
    staircase: Vec<(f64, f64)>,
}

impl GridFrontier {
    pub fn compute(h1: &Matrix, h2: &Matrix, s: &SymMatrix, grid_n: usize) -> Result<Self> {
        if s.dim() > 2 {
            return Err(Error::Unsupported("grid frontier supports t <= 2".into()));
        }
        let grid = box_grid(s, grid_n);
        let single = h1.rows() == 1 && h2.rows() == 1;
        let corners: Vec<(f64, f64)> = if single {
            let (a, b) = (h1.row(0).to_vec(), h2.row(0).to_vec());
            let (g1s, g2s) = (s.quad_form(&a), s.quad_form(&b));
            grid.iter()
                .map(|m| {
                    let (g1, g2) = (m.quad_form(&a), m.quad_form(&b));
                    let r0 = 0.5 * ((g1s + 1.0) / (g1 + 1.0)).log2().min(((g2s + 1.0) / (g2 + 1.0)).log2());
                    let r1 = 0.5 * ((g1 + 1.0) / (g2 + 1.0)).log2();
                    (r0.max(0.0), r1.max(0.0))
                })
                .collect()
        } else {
            grid.iter()
                .filter_map(|m| rates::region_point_general(h1, h2, s, m).ok())
                .map(|p| (p.r0, p.r1))
                .collect()
        };
        Ok(Self::from_corners(corners))
    }

    /// Frontier from `B = S^½ U diag(λ) Uᵀ S^½` with `λ` on an `n_lambda`
    /// grid in `[0, 1]²` and the rotation angle on an `n_theta` grid. Unlike
    /// the entrywise grid this reaches the curved faces of `{0 ⪯ B ⪯ S}`.
    pub fn compute_spectral(h1: &Matrix, h2: &Matrix, s: &SymMatrix, n_lambda: usize, n_theta: usize) -> Result<Self> {
        let t = s.dim();
        if t > 2 || n_lambda < 2 || n_theta < 1 {
            return Err(Error::Unsupported("spectral frontier supports t <= 2 and grids of size >= 2".into()));
        }
        let root = s.sqrt_psd().to_matrix();
        let lam = |k: usize| k as f64 / (n_lambda - 1) as f64;
        let single = h1.rows() == 1 && h2.rows() == 1;
        // single antenna: hBhᵀ = gᵀ W g with g = S^½ hᵀ
        let (g1, g2) = if single {
            (root.mul_vec(h1.row(0)), root.mul_vec(h2.row(0)))
        } else {
            (Vec::new(), Vec::new())
        };
        let (g1s, g2s) = (g1.iter().map(|x| x * x).sum::<f64>(), g2.iter().map(|x| x * x).sum::<f64>());
        let corner = |w: &SymMatrix| -> Option<(f64, f64)> {
            if single {
                let (q1, q2) = (w.quad_form(&g1), w.quad_form(&g2));
                let r0 = 0.5 * ((g1s + 1.0) / (q1 + 1.0)).log2().min(((g2s + 1.0) / (q2 + 1.0)).log2());
                let r1 = 0.5 * ((q1 + 1.0) / (q2 + 1.0)).log2();
                return Some((r0.max(0.0), r1.max(0.0)));
            }
            let b = project_box(&root.sandwich(w).ok()?, s);
            rates::region_point_general(h1, h2, s, &b).ok().map(|p| (p.r0, p.r1))
        };
        let corners: Vec<(f64, f64)> = if t == 1 {
            (0..n_lambda).filter_map(|k| corner(&SymMatrix::scalar(lam(k)))).collect()
        } else {
            (0..n_lambda * n_lambda)
                .into_par_iter()
                .flat_map_iter(|ij| {
                    let (l1, l2) = (lam(ij / n_lambda), lam(ij % n_lambda));
                    let thetas = if l1 == l2 { 1 } else { n_theta };
                    (0..thetas).filter_map(move |k| {
                        let th = std::f64::consts::PI * k as f64 / n_theta as f64;
                        let (c, sn) = (th.cos(), th.sin());
                        let w = SymMatrix::from_fn(2, |a, b| match (a, b) {
                            (0, 0) => l1 * c * c + l2 * sn * sn,
                            (1, 1) => l1 * sn * sn + l2 * c * c,
                            _ => (l1 - l2) * c * sn,
                        });
                        corner(&w)
                    })
                })
                .collect()
        };
        Ok(Self::from_corners(corners))
    }

    pub fn from_corners(mut corners: Vec<(f64, f64)>) -> Self {
        corners.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut run = f64::NEG_INFINITY;
        for c in corners.iter_mut() {
            run = run.max(c.1);
            c.1 = run;
        }
        GridFrontier { staircase: corners }
    }

    /// Largest `R1` among grid corners with common rate at least `r0`.
    pub fn max_r1_at(&self, r0: f64) -> Option<f64> {
        // staircase is sorted by decreasing R0
        let idx = self.staircase.partition_point(|c| c.0 >= r0);
        (idx > 0).then(|| self.staircase[idx - 1].1)
    }

    pub fn max_r0(&self) -> f64 {
        self.staircase.first().map(|c| c.0).unwrap_or(0.0)
    }
}

/// Removes rounding excursions outside `[0, S]`.
fn project_box(b: &SymMatrix, s: &SymMatrix) -> SymMatrix {
    let lower = b.project_psd();
    s - &(s - &lower).project_psd()
}
