//! Feasibility of scalar linear inequalities in one or two unknown symmetric
//! matrices, subject to a Löwner box `0 ⪯ B ⪯ S` or a trace budget
//! `B₁, B₂ ⪰ 0, Tr(B₁ + B₂) ≤ P`.
//!
//! [`solve`] runs a phase-1 log-det barrier method: it maximizes the smallest
//! normalized slack `s` over all constraints. A strictly positive optimum
//! certifies feasibility with an interior witness; a barrier duality-gap
//! bound below zero certifies infeasibility. Results inside the dead band
//! `|s*| ≤ 1e-7` are resolved by a grid scan when `t ≤ 2`.

use serde::Serialize;

use crate::channel::RANK_FLOOR;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymMatrix, PSD_TOL};

/// Half-width of the band around zero in which phase-1 cannot decide.
pub const DEAD_BAND: f64 = 1e-7;

/// Slack tolerance for re-checking a witness against the raw inequalities.
pub const WITNESS_SLACK_TOL: f64 = 1e-7;

const GRID_TOL: f64 = 1e-9;
const FALLBACK_GRID_BOX: usize = 41;
const FALLBACK_GRID_PAIR: usize = 9;
const TAU_INIT: f64 = 1.0;
const TAU_GROWTH: f64 = 8.0;
const TAU_MAX: f64 = 1e13;
const MAX_NEWTON: usize = 80;

/// `Σ_u ⟨coeffs[u], B_u⟩ + offset`, required to be nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFunctional {
    pub coeffs: Vec<SymMatrix>,
    pub offset: f64,
}

impl LinearFunctional {
    pub fn single(coeff: SymMatrix, offset: f64) -> Self {
        LinearFunctional { coeffs: vec![coeff], offset }
    }

    pub fn value(&self, unknowns: &[SymMatrix]) -> f64 {
        self.coeffs.iter().zip(unknowns).map(|(c, b)| c.inner(b)).sum::<f64>() + self.offset
    }

    fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.frobenius_norm().powi(2)).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cone {
    /// One unknown with `0 ⪯ B ⪯ S`.
    Box(SymMatrix),
    /// Two unknowns with `B₁, B₂ ⪰ 0` and `Tr(B₁ + B₂) ≤ P`.
    TracePair(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityProblem {
    dim: usize,
    inequalities: Vec<LinearFunctional>,
    cone: Cone,
}

impl FeasibilityProblem {
    pub fn new(dim: usize, inequalities: Vec<LinearFunctional>, cone: Cone) -> Result<Self> {
        let unknowns = match &cone {
            Cone::Box(s) => {
                if s.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        op: "FeasibilityProblem::new",
                        left: (dim, dim),
                        right: (s.dim(), s.dim()),
                    });
                }
                if !s.is_psd(PSD_TOL) {
                    return Err(Error::InvalidInput("box bound S is not positive semidefinite".into()));
                }
                1
            }
            Cone::TracePair(p) => {
                if !(*p >= 0.0) || !p.is_finite() {
                    return Err(Error::InvalidInput(format!("trace budget must be nonnegative, got {p}")));
                }
                2
            }
        };
        for row in &inequalities {
            if row.coeffs.len() != unknowns || row.coeffs.iter().any(|c| c.dim() != dim) {
                return Err(Error::InvalidInput("inequality shape does not match the unknowns".into()));
            }
            if !row.offset.is_finite() {
                return Err(Error::InvalidInput("inequality offset must be finite".into()));
            }
        }
        Ok(FeasibilityProblem { dim, inequalities, cone })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inequalities(&self) -> &[LinearFunctional] {
        &self.inequalities
    }

    pub fn cone(&self) -> &Cone {
        &self.cone
    }

    pub fn unknown_count(&self) -> usize {
        match self.cone {
            Cone::Box(_) => 1,
            Cone::TracePair(_) => 2,
        }
    }

    /// Largest violation of any constraint by `witness`: negative inequality
    /// slack, negative cone eigenvalue, or trace overshoot. Zero when the
    /// witness is feasible.
    pub fn max_violation(&self, witness: &[SymMatrix]) -> f64 {
        let mut worst = 0.0f64;
        for row in &self.inequalities {
            worst = worst.max(-row.value(witness));
        }
        match &self.cone {
            Cone::Box(s) => {
                worst = worst.max(-witness[0].min_eigenvalue());
                worst = worst.max(-(s - &witness[0]).min_eigenvalue());
            }
            Cone::TracePair(p) => {
                for b in witness {
                    worst = worst.max(-b.min_eigenvalue());
                }
                worst = worst.max(witness.iter().map(|b| b.trace()).sum::<f64>() - p);
            }
        }
        worst
    }

    /// Independent re-check of a claimed witness at the stated tolerances.
    pub fn accepts(&self, witness: &[SymMatrix]) -> bool {
        if witness.len() != self.unknown_count() || witness.iter().any(|b| b.dim() != self.dim) {
            return false;
        }
        let rows_ok = self.inequalities.iter().all(|r| r.value(witness) >= -WITNESS_SLACK_TOL);
        let cone_ok = match &self.cone {
            Cone::Box(s) => witness[0].is_psd(PSD_TOL) && (s - &witness[0]).is_psd(PSD_TOL),
            Cone::TracePair(p) => {
                witness.iter().all(|b| b.is_psd(PSD_TOL))
                    && witness.iter().map(|b| b.trace()).sum::<f64>() <= p + WITNESS_SLACK_TOL
            }
        };
        rows_ok && cone_ok
    }

    fn zero_witness(&self) -> Vec<SymMatrix> {
        vec![SymMatrix::zeros(self.dim); self.unknown_count()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Feasible(Vec<SymMatrix>),
    Infeasible,
    Undecided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityResult {
    pub status: Status,
    /// Zero for a feasible witness; otherwise the certified lower bound on the
    /// worst normalized violation (phase-1) or the best grid violation.
    pub max_violation: f64,
}

impl FeasibilityResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self.status, Status::Feasible(_))
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self.status, Status::Infeasible)
    }

    pub fn witness(&self) -> Option<&[SymMatrix]> {
        match &self.status {
            Status::Feasible(w) => Some(w),
            _ => None,
        }
    }

    fn feasible(witness: Vec<SymMatrix>) -> Self {
        FeasibilityResult { status: Status::Feasible(witness), max_violation: 0.0 }
    }

    fn infeasible(violation: f64) -> Self {
        FeasibilityResult { status: Status::Infeasible, max_violation: violation }
    }
}

/// Metadata describing the decision thresholds, for output headers.
#[derive(Debug, Clone, Serialize)]
pub struct SolverMetadata {
    pub dead_band: f64,
    pub witness_slack_tol: f64,
    pub psd_tol: f64,
}

pub fn metadata() -> SolverMetadata {
    SolverMetadata { dead_band: DEAD_BAND, witness_slack_tol: WITNESS_SLACK_TOL, psd_tol: PSD_TOL }
}

fn check_rate_params(alpha: f64, gamma0: f64) -> Result<()> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidInput(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    if !(0.0..=1.0).contains(&gamma0) {
        return Err(Error::InvalidInput(format!("gamma0 must lie in [0, 1], got {gamma0}")));
    }
    Ok(())
}

fn check_vec(h: &[f64], t: usize, name: &str) -> Result<()> {
    if h.len() != t {
        return Err(Error::DimensionMismatch { op: "channel vector", left: (1, h.len()), right: (1, t) });
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{name} has non-finite entries")));
    }
    Ok(())
}

/// Matrix-power boundary test at `(alpha, gamma0)`:
///
/// ```text
/// h₁(S − B)h₁ᵀ ≥ αγ₀(h₁Bh₁ᵀ + 1)
/// h₂(S − B)h₂ᵀ ≥ αγ₀(h₂Bh₂ᵀ + 1)
/// h₁Bh₁ᵀ − h₂Bh₂ᵀ ≥ α(1 − γ₀)(h₂Bh₂ᵀ + 1)
/// 0 ⪯ B ⪯ S
/// ```
pub fn build_matrix_power_problem(
    h1: &[f64],
    h2: &[f64],
    s: &SymMatrix,
    alpha: f64,
    gamma0: f64,
) -> Result<FeasibilityProblem> {
    check_rate_params(alpha, gamma0)?;
    let t = s.dim();
    check_vec(h1, t, "h1")?;
    check_vec(h2, t, "h2")?;
    let q1 = SymMatrix::outer(h1);
    let q2 = SymMatrix::outer(h2);
    let c0 = alpha * gamma0;
    let c1 = alpha * (1.0 - gamma0);
    let rows = vec![
        LinearFunctional::single(q1.scale(-(1.0 + c0)), s.quad_form(h1) - c0),
        LinearFunctional::single(q2.scale(-(1.0 + c0)), s.quad_form(h2) - c0),
        LinearFunctional::single(&q1 - &q2.scale(1.0 + c1), -c1),
    ];
    FeasibilityProblem::new(t, rows, Cone::Box(s.clone()))
}

/// Total-power boundary test at `(alpha, gamma0)` in the pair `(B₁, B₂)`:
///
/// ```text
/// h₁B₂h₁ᵀ ≥ αγ₀(h₁B₁h₁ᵀ + 1)
/// h₂B₂h₂ᵀ ≥ αγ₀(h₂B₁h₂ᵀ + 1)
/// h₁B₁h₁ᵀ − h₂B₁h₂ᵀ ≥ α(1 − γ₀)(h₂B₁h₂ᵀ + 1)
/// B₁, B₂ ⪰ 0,  Tr(B₁ + B₂) ≤ P
/// ```
pub fn build_total_power_problem(h1: &[f64], h2: &[f64], p: f64, alpha: f64, gamma0: f64) -> Result<FeasibilityProblem> {
    check_rate_params(alpha, gamma0)?;
    let t = h1.len();
    if t == 0 {
        return Err(Error::InvalidInput("channel vectors must be nonempty".into()));
    }
    check_vec(h1, t, "h1")?;
    check_vec(h2, t, "h2")?;
    let q1 = SymMatrix::outer(h1);
    let q2 = SymMatrix::outer(h2);
    let c0 = alpha * gamma0;
    let c1 = alpha * (1.0 - gamma0);
    let rows = vec![
        LinearFunctional { coeffs: vec![q1.scale(-c0), q1.clone()], offset: -c0 },
        LinearFunctional { coeffs: vec![q2.scale(-c0), q2.clone()], offset: -c0 },
        LinearFunctional { coeffs: vec![&q1 - &q2.scale(1.0 + c1), SymMatrix::zeros(t)], offset: -c1 },
    ];
    FeasibilityProblem::new(t, rows, Cone::TracePair(p))
}

/// Decides feasibility with the phase-1 barrier method, falling back to a
/// grid scan inside the dead band when `t ≤ 2`.
pub fn solve(problem: &FeasibilityProblem) -> FeasibilityResult {
    let result = solve_inner(problem);
    if matches!(result.status, Status::Undecided) && problem.dim <= 2 {
        let n = match problem.cone {
            Cone::Box(_) => FALLBACK_GRID_BOX,
            Cone::TracePair(_) => FALLBACK_GRID_PAIR,
        };
        if let Ok(grid) = brute_force_feasible(problem, n) {
            if grid.is_feasible() {
                return grid;
            }
        }
    }
    result
}

fn solve_inner(problem: &FeasibilityProblem) -> FeasibilityResult {
    // rows with vanishing coefficients are constants
    let mut rows = Vec::with_capacity(problem.inequalities.len());
    for row in &problem.inequalities {
        let norm = row.coeff_norm();
        if norm <= 1e-14 * (1.0 + row.offset.abs()) {
            if row.offset < -GRID_TOL {
                return FeasibilityResult::infeasible(-row.offset);
            }
        } else {
            rows.push(row.clone());
        }
    }

    match &problem.cone {
        Cone::Box(s) => solve_box(problem, &rows, s),
        Cone::TracePair(p) => {
            if *p <= 0.0 {
                let zero = problem.zero_witness();
                let viol = problem.max_violation(&zero);
                return if viol <= GRID_TOL {
                    FeasibilityResult::feasible(zero)
                } else {
                    FeasibilityResult::infeasible(viol)
                };
            }
            let init = vec![SymMatrix::identity(problem.dim).scale(p / (2.0 * problem.dim as f64)); 2];
            phase_one(problem, &rows, &init)
        }
    }
}

fn solve_box(problem: &FeasibilityProblem, rows: &[LinearFunctional], s: &SymMatrix) -> FeasibilityResult {
    let t = problem.dim;
    let eig = s.eigen();
    let max = eig.values.iter().fold(0.0f64, |m, v| m.max(*v));
    let keep: Vec<usize> = (0..t).filter(|&k| max > 0.0 && eig.values[k] > RANK_FLOOR * max).collect();

    if keep.is_empty() {
        let zero = problem.zero_witness();
        let viol = problem.max_violation(&zero);
        return if viol <= GRID_TOL {
            FeasibilityResult::feasible(zero)
        } else {
            FeasibilityResult::infeasible(viol)
        };
    }
    if keep.len() == t {
        return phase_one(problem, rows, &[s.scale(0.5)]);
    }

    // restrict to range(S): B = Q B' Qᵀ
    let mut q = Matrix::zeros(t, keep.len());
    for (c, &k) in keep.iter().enumerate() {
        for r in 0..t {
            q.set(r, c, eig.vectors.get(r, k));
        }
    }
    let reduced_rows: Vec<LinearFunctional> = rows
        .iter()
        .map(|r| LinearFunctional::single(q.sandwich_t(&r.coeffs[0]).expect("shape"), r.offset))
        .collect();
    let s_red = SymMatrix::diag(&keep.iter().map(|&k| eig.values[k]).collect::<Vec<_>>());
    let reduced = FeasibilityProblem {
        dim: keep.len(),
        inequalities: reduced_rows.clone(),
        cone: Cone::Box(s_red.clone()),
    };
    let res = phase_one(&reduced, &reduced_rows, &[s_red.scale(0.5)]);
    match res.status {
        Status::Feasible(w) => {
            let lifted = q.sandwich(&w[0]).expect("shape");
            FeasibilityResult::feasible(vec![lifted])
        }
        other => FeasibilityResult { status: other, max_violation: res.max_violation },
    }
}

/// Affine matrix map `F(z) = F₀ + Σ_k z_k F_k`. Its slack is the smallest
/// eigenvalue of `W F Wᵀ`, with `W = M^{-1/2}` for the slack metric `M`.
struct AffineLmi {
    f0: SymMatrix,
    fk: Vec<SymMatrix>,
    whiten: Option<Matrix>,
}

impl AffineLmi {
    fn slack(&self, z: &[f64]) -> f64 {
        let f = self.eval(z);
        match &self.whiten {
            Some(w) => w.sandwich(&f).map(|m| m.min_eigenvalue()).unwrap_or(f64::NEG_INFINITY),
            None => f.min_eigenvalue(),
        }
    }

    fn eval(&self, z: &[f64]) -> SymMatrix {
        let mut out = self.f0.clone();
        for (zk, fk) in z.iter().zip(&self.fk) {
            if *zk != 0.0 && fk.max_abs() != 0.0 {
                out = &out + &fk.scale(*zk);
            }
        }
        out
    }
}

/// Affine scalar `a·z + b`.
struct AffineRow {
    a: Vec<f64>,
    b: f64,
}

impl AffineRow {
    fn eval(&self, z: &[f64]) -> f64 {
        self.a.iter().zip(z).map(|(x, y)| x * y).sum::<f64>() + self.b
    }
}

/// Index map for the entries `(i, j), i ≤ j` of a symmetric matrix.
fn sym_basis(t: usize) -> Vec<(usize, usize)> {
    (0..t).flat_map(|i| (i..t).map(move |j| (i, j))).collect()
}

fn basis_matrix(t: usize, (i, j): (usize, usize)) -> SymMatrix {
    SymMatrix::from_fn(t, |a, b| if (a == i && b == j) || (a == j && b == i) { 1.0 } else { 0.0 })
}

fn unpack(t: usize, basis: &[(usize, usize)], x: &[f64]) -> SymMatrix {
    let mut data = vec![0.0; t * t];
    for (k, &(i, j)) in basis.iter().enumerate() {
        data[i * t + j] = x[k];
        data[j * t + i] = x[k];
    }
    SymMatrix::new(t, data).expect("shape")
}

fn pack(basis: &[(usize, usize)], b: &SymMatrix) -> Vec<f64> {
    basis.iter().map(|&(i, j)| b.get(i, j)).collect()
}

struct PhaseOne {
    t: usize,
    basis: Vec<(usize, usize)>,
    unknowns: usize,
    nz: usize,
    rows: Vec<AffineRow>,
    lmis: Vec<AffineLmi>,
    degree: f64,
}

impl PhaseOne {
    fn build(problem: &FeasibilityProblem, rows: &[LinearFunctional]) -> Self {
        let t = problem.dim;
        let basis = sym_basis(t);
        let p = basis.len();
        let unknowns = problem.unknown_count();
        let nz = unknowns * p + 1;
        let s_idx = nz - 1;

        let coeff_entry = |c: &SymMatrix, (i, j): (usize, usize)| {
            if i == j {
                c.get(i, i)
            } else {
                2.0 * c.get(i, j)
            }
        };

        let mut affine_rows = Vec::new();
        for row in rows {
            let norm = row.coeff_norm();
            let mut a = vec![0.0; nz];
            for (u, c) in row.coeffs.iter().enumerate() {
                for (k, &ij) in basis.iter().enumerate() {
                    a[u * p + k] = coeff_entry(c, ij) / norm;
                }
            }
            a[s_idx] = -1.0;
            affine_rows.push(AffineRow { a, b: row.offset / norm });
        }

        // box slacks are measured relative to S so thin boxes stay well scaled
        let (metric, whiten) = match &problem.cone {
            Cone::Box(s) => {
                let m = s.scale(1.0 / s.max_eigenvalue());
                let w = m.map_eigenvalues(|x| 1.0 / x.sqrt()).to_matrix();
                (m, Some(w))
            }
            Cone::TracePair(_) => (SymMatrix::identity(t), None),
        };
        let mut lmis = Vec::new();
        let unit: Vec<SymMatrix> = basis.iter().map(|&ij| basis_matrix(t, ij)).collect();
        for u in 0..unknowns {
            let mut fk = vec![SymMatrix::zeros(t); nz];
            for k in 0..p {
                fk[u * p + k] = unit[k].clone();
            }
            fk[s_idx] = metric.scale(-1.0);
            lmis.push(AffineLmi { f0: SymMatrix::zeros(t), fk, whiten: whiten.clone() });
        }
        match &problem.cone {
            Cone::Box(s) => {
                let mut fk = vec![SymMatrix::zeros(t); nz];
                for k in 0..p {
                    fk[k] = unit[k].scale(-1.0);
                }
                fk[s_idx] = metric.scale(-1.0);
                lmis.push(AffineLmi { f0: s.clone(), fk, whiten: whiten.clone() });
            }
            Cone::TracePair(budget) => {
                let norm = ((unknowns * t) as f64).sqrt();
                let mut a = vec![0.0; nz];
                for u in 0..unknowns {
                    for (k, &(i, j)) in basis.iter().enumerate() {
                        if i == j {
                            a[u * p + k] = -1.0 / norm;
                        }
                    }
                }
                a[s_idx] = -1.0;
                affine_rows.push(AffineRow { a, b: budget / norm });
            }
        }
        let degree = affine_rows.len() as f64 + (lmis.len() * t) as f64;
        PhaseOne { t, basis, unknowns, nz, rows: affine_rows, lmis, degree }
    }

    fn unknowns_of(&self, z: &[f64]) -> Vec<SymMatrix> {
        let p = self.basis.len();
        (0..self.unknowns).map(|u| unpack(self.t, &self.basis, &z[u * p..(u + 1) * p])).collect()
    }

    /// Worst normalized slack of the matrix part of `z`, ignoring `s`.
    fn true_slack(&self, z: &[f64]) -> f64 {
        let mut x = z.to_vec();
        x[self.nz - 1] = 0.0;
        let mut worst = f64::INFINITY;
        for r in &self.rows {
            worst = worst.min(r.eval(&x));
        }
        for l in &self.lmis {
            worst = worst.min(l.slack(&x));
        }
        worst
    }

    /// Barrier value `τ s + Σ log r_i + Σ log det F_j`, or `None` outside the domain.
    fn value(&self, z: &[f64], tau: f64) -> Option<f64> {
        let mut v = tau * z[self.nz - 1];
        for r in &self.rows {
            let ri = r.eval(z);
            if !(ri > 0.0) {
                return None;
            }
            v += ri.ln();
        }
        for l in &self.lmis {
            v += l.eval(z).ln_det().ok()?;
        }
        Some(v)
    }

    fn grad_hess(&self, z: &[f64], tau: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let nz = self.nz;
        let mut g = vec![0.0; nz];
        let mut h = vec![0.0; nz * nz];
        g[nz - 1] = tau;
        for r in &self.rows {
            let ri = r.eval(z);
            if !(ri > 0.0) {
                return None;
            }
            for k in 0..nz {
                g[k] += r.a[k] / ri;
                for l in 0..nz {
                    h[k * nz + l] -= r.a[k] * r.a[l] / (ri * ri);
                }
            }
        }
        for lmi in &self.lmis {
            let f = lmi.eval(z);
            f.cholesky().ok()?;
            let ginv = f.inverse().ok()?;
            let active: Vec<usize> = (0..nz).filter(|&k| lmi.fk[k].max_abs() != 0.0).collect();
            let w: Vec<Matrix> = active
                .iter()
                .map(|&k| ginv.mul(&lmi.fk[k]))
                .collect();
            for (ai, &k) in active.iter().enumerate() {
                g[k] += ginv.inner(&lmi.fk[k]);
                for (bi, &l) in active.iter().enumerate() {
                    let wk = &w[ai];
                    let wl = &w[bi];
                    let mut tr = 0.0;
                    for p in 0..self.t {
                        for q in 0..self.t {
                            tr += wk.get(p, q) * wl.get(q, p);
                        }
                    }
                    h[k * nz + l] -= tr;
                }
            }
        }
        Some((g, h))
    }
}

fn phase_one(problem: &FeasibilityProblem, rows: &[LinearFunctional], init: &[SymMatrix]) -> FeasibilityResult {
    let ph = PhaseOne::build(problem, rows);
    let nz = ph.nz;
    let mut z: Vec<f64> = init.iter().flat_map(|b| pack(&ph.basis, b)).collect();
    z.push(0.0);
    let start_slack = ph.true_slack(&z);
    z[nz - 1] = start_slack - 1.0 - start_slack.abs() * 0.1;

    let mut best_slack = start_slack;
    let mut best_z = z.clone();
    let witness_of = |z: &[f64]| ph.unknowns_of(z);

    if best_slack > DEAD_BAND {
        let w = witness_of(&best_z);
        if problem.accepts(&w) {
            return FeasibilityResult::feasible(w);
        }
    }

    let mut tau = TAU_INIT;
    let mut upper = f64::INFINITY;
    while tau <= TAU_MAX {
        for _ in 0..MAX_NEWTON {
            let Some((g, h)) = ph.grad_hess(&z, tau) else { break };
            let neg_h = SymMatrix::new(nz, h.iter().map(|v| -v).collect()).expect("square");
            let d = match neg_h.solve_spd(&g) {
                Ok(d) => d,
                Err(_) => {
                    let reg = 1e-12 * neg_h.trace().abs().max(1e-300);
                    let shifted = &neg_h + &SymMatrix::identity(nz).scale(reg);
                    match shifted.solve_spd(&g) {
                        Ok(d) => d,
                        Err(_) => break,
                    }
                }
            };
            let decrement: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            if decrement < 1e-12 {
                break;
            }
            let f0 = match ph.value(&z, tau) {
                Some(v) => v,
                None => break,
            };
            let mut step = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let trial: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + step * b).collect();
                if let Some(f1) = ph.value(&trial, tau) {
                    if f1 >= f0 + 0.25 * step * decrement {
                        z = trial;
                        moved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
            let slack = ph.true_slack(&z);
            if slack > best_slack {
                best_slack = slack;
                best_z = z.clone();
            }
            if best_slack > DEAD_BAND {
                let w = witness_of(&best_z);
                if problem.accepts(&w) {
                    return FeasibilityResult::feasible(w);
                }
            }
            if decrement < 1e-10 {
                break;
            }
        }
        // near-central point: s* ≤ s + ν/τ
        upper = upper.min(z[nz - 1] + ph.degree / tau);
        if upper < -DEAD_BAND {
            return FeasibilityResult::infeasible(-upper);
        }
        tau *= TAU_GROWTH;
    }
    if best_slack > DEAD_BAND {
        let w = witness_of(&best_z);
        if problem.accepts(&w) {
            return FeasibilityResult::feasible(w);
        }
    }
    FeasibilityResult { status: Status::Undecided, max_violation: (-best_slack).max(0.0) }
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| if n == 1 { lo } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 })
}

/// Symmetric `t ≤ 2` matrices on a `grid_n`-per-parameter grid over
/// `(b₁₁, b₂₂, b₁₂)` inside `0 ⪯ B ⪯ S`. For each diagonal pair the
/// off-diagonal grid spans exactly the admissible interval, so boundary
/// matrices (rank-deficient `B` or `S − B`) are included.
pub fn box_grid(s: &SymMatrix, grid_n: usize) -> Vec<SymMatrix> {
    let mut out = Vec::new();
    match s.dim() {
        1 => {
            for b in linspace(0.0, s.get(0, 0).max(0.0), grid_n) {
                out.push(SymMatrix::scalar(b));
            }
        }
        2 => {
            let (s11, s12, s22) = (s.get(0, 0).max(0.0), s.get(0, 1), s.get(1, 1).max(0.0));
            for b11 in linspace(0.0, s11, grid_n) {
                for b22 in linspace(0.0, s22, grid_n) {
                    let inner = (b11 * b22).sqrt();
                    let outer = ((s11 - b11).max(0.0) * (s22 - b22).max(0.0)).sqrt();
                    let lo = (-inner).max(s12 - outer);
                    let hi = inner.min(s12 + outer);
                    if lo > hi + 1e-12 {
                        continue;
                    }
                    let hi = hi.max(lo);
                    for b12 in linspace(lo, hi, grid_n) {
                        out.push(SymMatrix::new(2, vec![b11, b12, b12, b22]).expect("2x2"));
                    }
                }
            }
        }
        _ => {}
    }
    out
}

/// PSD `t ≤ 2` matrices with trace at most `budget` on a per-parameter grid.
fn psd_grid(t: usize, budget: f64, grid_n: usize) -> Vec<SymMatrix> {
    let mut out = Vec::new();
    match t {
        1 => {
            for b in linspace(0.0, budget, grid_n) {
                out.push(SymMatrix::scalar(b));
            }
        }
        2 => {
            for b11 in linspace(0.0, budget, grid_n) {
                for b22 in linspace(0.0, (budget - b11).max(0.0), grid_n) {
                    let r = (b11 * b22).sqrt();
                    for b12 in linspace(-r, r, grid_n) {
                        out.push(SymMatrix::new(2, vec![b11, b12, b12, b22]).expect("2x2"));
                    }
                }
            }
        }
        _ => {}
    }
    out
}

/// Exhaustive grid oracle for `t ≤ 2`. Reports `Feasible` with the first grid
/// point meeting every constraint at tolerance 1e-9, otherwise `Infeasible`
/// with the smallest violation seen. Test oracle only: the pair cone costs
/// `O(grid_n⁶)` evaluations.
pub fn brute_force_feasible(problem: &FeasibilityProblem, grid_n: usize) -> Result<FeasibilityResult> {
    if problem.dim > 2 {
        return Err(Error::Unsupported(format!("grid oracle supports t <= 2, got t = {}", problem.dim)));
    }
    if !(2..=101).contains(&grid_n) {
        return Err(Error::InvalidInput(format!("grid_n must lie in [2, 101], got {grid_n}")));
    }
    let check = |w: &[SymMatrix]| -> f64 {
        let mut worst = 0.0f64;
        for row in &problem.inequalities {
            worst = worst.max(-row.value(w));
        }
        worst
    };
    let mut best = f64::INFINITY;
    match &problem.cone {
        Cone::Box(s) => {
            for b in box_grid(s, grid_n) {
                let w = [b];
                let v = check(&w);
                if v <= GRID_TOL && w[0].is_psd(GRID_TOL) && (s - &w[0]).is_psd(GRID_TOL) {
                    return Ok(FeasibilityResult::feasible(w.to_vec()));
                }
                best = best.min(v);
            }
        }
        Cone::TracePair(p) => {
            let t = problem.dim;
            for b1 in psd_grid(t, *p, grid_n) {
                let rem = (p - b1.trace()).max(0.0);
                for b2 in psd_grid(t, rem, grid_n) {
                    let w = [b1.clone(), b2];
                    let v = check(&w);
                    if v <= GRID_TOL {
                        return Ok(FeasibilityResult::feasible(w.to_vec()));
                    }
                    best = best.min(v);
                }
            }
        }
    }
    Ok(FeasibilityResult::infeasible(best))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s_example() -> SymMatrix {
        SymMatrix::from_rows(&[vec![3.3333, 1.2346], vec![1.2346, 1.6667]]).unwrap()
    }

    const H1: [f64; 2] = [2.0, 0.4];
    const H2: [f64; 2] = [0.4, 1.0];

    #[test]
    fn empty_box_is_feasible_at_center() {
        let p = FeasibilityProblem::new(2, vec![], Cone::Box(SymMatrix::identity(2))).unwrap();
        let r = solve(&p);
        let w = r.witness().expect("feasible");
        assert!((&w[0] - &SymMatrix::identity(2).scale(0.5)).max_abs() < 1e-12);
    }

    #[test]
    fn trace_bound_contradiction_is_infeasible() {
        let row = LinearFunctional::single(SymMatrix::identity(2), -10.0);
        let p = FeasibilityProblem::new(2, vec![row], Cone::Box(SymMatrix::identity(2))).unwrap();
        let r = solve(&p);
        assert!(r.is_infeasible(), "{r:?}");
        assert!(r.max_violation > DEAD_BAND);
    }

    #[test]
    fn matrix_power_problem_alpha_zero_admits_zero() {
        let p = build_matrix_power_problem(&H1, &H2, &s_example(), 0.0, 0.3).unwrap();
        assert!(p.accepts(&[SymMatrix::zeros(2)]));
        assert!(solve(&p).is_feasible());
    }

    #[test]
    fn matrix_power_problem_gamma_one_zero_witness_threshold() {
        let s = s_example();
        let cap = s.quad_form(&H1).min(s.quad_form(&H2));
        let below = build_matrix_power_problem(&H1, &H2, &s, cap * 0.999, 1.0).unwrap();
        assert!(below.accepts(&[SymMatrix::zeros(2)]));
        let above = build_matrix_power_problem(&H1, &H2, &s, cap * 1.001, 1.0).unwrap();
        assert!(!above.accepts(&[SymMatrix::zeros(2)]));
    }

    #[test]
    fn matrix_power_problem_gamma_zero_reduces_to_wiretap_rows() {
        let s = s_example();
        let p = build_matrix_power_problem(&H1, &H2, &s, 2.0, 0.0).unwrap();
        // with γ₀ = 0 the first two rows are h_k(S − B)h_kᵀ ≥ 0, true on the box
        for b in box_grid(&s, 7) {
            assert!(p.inequalities()[0].value(&[b.clone()]) >= -1e-12);
            assert!(p.inequalities()[1].value(&[b]) >= -1e-12);
        }
    }

    #[test]
    fn matrix_power_problem_wiretap_value_at_s_is_feasible() {
        let s = s_example();
        let alpha = 2f64.powf(2.0 * 0.99) - 1.0;
        let p = build_matrix_power_problem(&H1, &H2, &s, alpha, 0.0).unwrap();
        let r = solve(&p);
        assert!(r.is_feasible());
        assert!(p.accepts(r.witness().unwrap()));
    }

    #[test]
    fn matrix_power_problem_huge_alpha_is_infeasible_for_both() {
        let p = build_matrix_power_problem(&H1, &H2, &s_example(), 1e6, 0.5).unwrap();
        assert!(solve(&p).is_infeasible());
        assert!(brute_force_feasible(&p, 21).unwrap().is_infeasible());
    }

    #[test]
    fn parameter_validation() {
        assert!(build_matrix_power_problem(&H1, &H2, &s_example(), -1.0, 0.5).is_err());
        assert!(build_matrix_power_problem(&H1, &H2, &s_example(), 1.0, 1.5).is_err());
        assert!(build_matrix_power_problem(&[1.0], &H2, &s_example(), 1.0, 0.5).is_err());
        assert!(build_total_power_problem(&H1, &H2, 5.0, f64::NAN, 0.5).is_err());
        let three = FeasibilityProblem::new(3, vec![], Cone::Box(SymMatrix::identity(3))).unwrap();
        assert!(matches!(brute_force_feasible(&three, 11), Err(Error::Unsupported(_))));
    }

    #[test]
    fn total_power_problem_zero_budget() {
        let p = build_total_power_problem(&H1, &H2, 0.0, 0.0, 0.4).unwrap();
        assert!(solve(&p).is_feasible());
        // any alpha > 0 with γ₀ < 1 needs h₁B₁h₁ᵀ − h₂B₁h₂ᵀ > 0
        let p = build_total_power_problem(&H1, &H2, 0.0, 0.5, 0.4).unwrap();
        assert!(solve(&p).is_infeasible());
        let p = build_total_power_problem(&H1, &H2, 0.0, 0.5, 1.0).unwrap();
        assert!(solve(&p).is_infeasible());
    }

    #[test]
    fn total_power_problem_alpha_zero_feasible() {
        let p = build_total_power_problem(&H1, &H2, 5.0, 0.0, 0.7).unwrap();
        let r = solve(&p);
        assert!(r.is_feasible());
        assert!(p.accepts(r.witness().unwrap()));
    }

    #[test]
    fn singular_box_is_reduced_to_range() {
        // S = v vᵀ: only B = b v vᵀ is admissible
        let v = [0.6, 0.8];
        let s = SymMatrix::outer(&v).scale(2.0);
        let p = build_matrix_power_problem(&H1, &H2, &s, 0.2, 0.0).unwrap();
        let r = solve(&p);
        if let Some(w) = r.witness() {
            assert!(p.accepts(w));
        }
        let grid = brute_force_feasible(&p, 41).unwrap();
        assert_eq!(r.is_feasible(), grid.is_feasible());
    }

    #[test]
    fn zero_s_box() {
        let p = build_matrix_power_problem(&H1, &H2, &SymMatrix::zeros(2), 0.0, 0.5).unwrap();
        assert!(solve(&p).is_feasible());
        let p = build_matrix_power_problem(&H1, &H2, &SymMatrix::zeros(2), 1.0, 0.5).unwrap();
        assert!(solve(&p).is_infeasible());
    }

    #[test]
    fn box_grid_stays_inside_box() {
        let s = s_example();
        let grid = box_grid(&s, 11);
        assert!(!grid.is_empty());
        for b in grid {
            assert!(b.is_psd(1e-9) && (&s - &b).is_psd(1e-9));
        }
    }
}
