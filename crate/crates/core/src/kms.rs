//! Cocycle dynamics, KMS certification, the correspondence between KMS
//! states and pairs `(μ, Φ)`, the crossed-product form of the trace
//! condition, and a solver for KMS states.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conv::{AlgebraModel, Section};
use crate::fellbundle::GroupoidAction;
use crate::groupoid::{
    check_quasi_invariant, solve_quasi_invariant, Cocycle, FiniteGroupoid, UnitId, UnitMeasure,
};
use crate::linalg::{
    approx_eq_c, frobenius, hermitian_eigen, hs_inner, orthonormalize, pinv, real, CMat, CVec, C64,
};
use crate::report::Check;
use crate::states::{
    describe, disintegrate, integrate, Disintegration, State, StateCertificate, StateField,
    StatesError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KmsError {
    #[error("condition I fails: {0:?}")]
    ConditionI(Check),
    #[error("condition II fails: {0:?}")]
    ConditionII(Check),
    #[error(transparent)]
    States(#[from] StatesError),
    #[error("state is not KMS (residual {residual:.3e}, witness {witness:?})")]
    NotKms {
        residual: f64,
        witness: Option<Vec<String>>,
    },
    #[error(
        "input is not a state (min eigenvalue {min_eigenvalue:.3e}, φ(1) = {value_at_unit:?})"
    )]
    NotAState {
        min_eigenvalue: f64,
        value_at_unit: [f64; 2],
    },
    #[error("bundle is not the pullback of the action at `{0}`")]
    NotPullback(String),
}

impl KmsError {
    /// The error for a certificate that did not pass the KMS check.
    pub fn rejected(cert: &KmsCertificate) -> Self {
        if !cert.state.is_state() {
            KmsError::NotAState {
                min_eigenvalue: cert.state.min_eigenvalue,
                value_at_unit: cert.state.value_at_unit,
            }
        } else {
            KmsError::NotKms {
                residual: cert.kms.max_residual,
                witness: cert.kms.witness.clone(),
            }
        }
    }
}

/// `σ_t(f)(γ) = e^{itc(γ)} f(γ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dynamics {
    cocycle: Cocycle,
}

impl Dynamics {
    pub fn new(cocycle: Cocycle) -> Self {
        Self { cocycle }
    }

    pub fn cocycle(&self) -> &Cocycle {
        &self.cocycle
    }

    pub fn sigma_t(&self, f: &Section, t: f64) -> Section {
        f.map(|a, m| m * C64::from_polar(1.0, t * self.cocycle.at(a)))
    }

    /// Analytic continuation `σ_{iβ}(f)(γ) = e^{-βc(γ)} f(γ)`.
    pub fn sigma_i_beta(&self, f: &Section, beta: f64) -> Section {
        f.map(|a, m| m * real((-beta * self.cocycle.at(a)).exp()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KmsCertificate {
    pub beta: f64,
    pub state: StateCertificate,
    /// `φ(e_i e_j) = φ(e_j σ_{iβ}(e_i))` over the orthonormal basis grid.
    pub kms: Check,
    pub condition_i: Option<Check>,
    pub condition_ii: Option<Check>,
    pub pass: bool,
}

impl KmsCertificate {
    fn refresh(&mut self) {
        self.pass = self.state.is_state()
            && self.kms.holds
            && self.condition_i.as_ref().is_none_or(|c| c.holds)
            && self.condition_ii.as_ref().is_none_or(|c| c.holds);
    }

    pub fn with_conditions(mut self, ci: Check, cii: Check) -> Self {
        self.condition_i = Some(ci);
        self.condition_ii = Some(cii);
        self.refresh();
        self
    }
}

/// Checks the KMS identity on every pair of orthonormal basis elements.
pub fn is_kms(
    model: &AlgebraModel,
    phi: &State,
    dynamics: &Dynamics,
    beta: f64,
    tol: f64,
) -> KmsCertificate {
    let n = model.dim();
    let mut kms = Check::pass();
    for i in 0..n {
        let (ai, _) = model.onb_element(i);
        let w = (-beta * dynamics.cocycle().at(ai)).exp();
        for j in 0..n {
            let lhs = phi.product_value(model, i, j);
            let rhs = phi.product_value(model, j, i) * w;
            kms.record((lhs - rhs).norm(), approx_eq_c(lhs, rhs, tol), || {
                vec![describe(model, i), describe(model, j)]
            });
        }
    }
    let mut cert = KmsCertificate {
        beta,
        state: phi.certify(model, tol),
        kms,
        condition_i: None,
        condition_ii: None,
        pass: false,
    };
    cert.refresh();
    cert
}

/// Quasi-invariance of `μ` with Radon–Nikodym derivative `e^{-βc}`.
pub fn check_condition_i(
    g: &FiniteGroupoid,
    mu: &UnitMeasure,
    c: &Cocycle,
    beta: f64,
    tol: f64,
) -> Check {
    let q = check_quasi_invariant(g, mu, &c.modular(beta), tol);
    Check {
        holds: q.holds,
        max_residual: q.max_residual,
        witness: q.witness.map(|a| vec![g.arrow_name(a).to_string()]),
    }
}

/// The trace condition
/// `φ_{s(η)}(a ξ_i^* ξ_j δ_γ) = φ_{r(η)}(ξ_j a ξ_i^* δ_{ηγη^{-1}})` for
/// `x` in `support`, `γ ∈ G^x_x`, `η ∈ G_x` and orthonormal basis elements
/// `a ∈ A_γ`, `ξ_i, ξ_j ∈ A_η` (the polarised form of the condition).
pub fn check_condition_ii(
    model: &AlgebraModel,
    field: &StateField,
    support: &[UnitId],
    tol: f64,
) -> Check {
    let b = model.bundle();
    let g = b.groupoid();
    let mut check = Check::pass();
    for &x in support {
        let iso_x = model.isotropy(x);
        let Some(phi_x) = field.get(x) else {
            check.record(f64::INFINITY, false, || {
                vec![format!("φ undefined at {}", g.unit_name(x))]
            });
            continue;
        };
        for (lg, &gamma) in iso_x.parent.iter().enumerate() {
            for eta in g.source_fiber(x) {
                let y = g.tgt(eta);
                let iso_y = model.isotropy(y);
                let Some(phi_y) = field.get(y) else {
                    check.record(f64::INFINITY, false, || {
                        vec![format!("φ undefined at {}", g.unit_name(y))]
                    });
                    continue;
                };
                let conj = g
                    .compose(g.compose(eta, gamma).unwrap(), g.inv(eta))
                    .unwrap();
                let lc = iso_y
                    .local(conj)
                    .expect("conjugate lies in the isotropy at r(η)");
                let fa = b.fiber(gamma).onb();
                let fx = b.fiber(eta).onb();
                for (ka, a) in fa.iter().enumerate() {
                    for (i, xi) in fx.iter().enumerate() {
                        for (j, xj) in fx.iter().enumerate() {
                            let lhs = phi_x.eval_at(lg, &(a * xi.adjoint() * xj));
                            let rhs = phi_y.eval_at(lc, &(xj * a * xi.adjoint()));
                            check.record((lhs - rhs).norm(), approx_eq_c(lhs, rhs, tol), || {
                                vec![
                                    g.unit_name(x).to_string(),
                                    g.arrow_name(gamma).to_string(),
                                    g.arrow_name(eta).to_string(),
                                    format!("a#{ka}"),
                                    format!("ξ#{i}"),
                                    format!("ξ#{j}"),
                                ]
                            });
                        }
                    }
                }
            }
        }
    }
    check
}

/// Integrates a pair satisfying Conditions I and II and certifies the
/// result.
pub fn kms_from_pair(
    model: &AlgebraModel,
    mu: &UnitMeasure,
    field: &StateField,
    dynamics: &Dynamics,
    beta: f64,
    tol: f64,
) -> Result<(State, KmsCertificate), KmsError> {
    let g = model.bundle().groupoid();
    let ci = check_condition_i(g, mu, dynamics.cocycle(), beta, tol);
    if !ci.holds {
        return Err(KmsError::ConditionI(ci));
    }
    let cii = check_condition_ii(model, field, &mu.support(tol), tol);
    if !cii.holds {
        return Err(KmsError::ConditionII(cii));
    }
    let phi = integrate(model, mu, field, tol)?;
    let cert = is_kms(model, &phi, dynamics, beta, tol).with_conditions(ci, cii);
    if !cert.pass {
        return Err(KmsError::rejected(&cert));
    }
    Ok((phi, cert))
}

/// A KMS state's disintegration, with Conditions I and II evaluated on it.
#[derive(Clone, Debug, PartialEq)]
pub struct KmsPair {
    pub disintegration: Disintegration,
    pub certificate: KmsCertificate,
}

/// Disintegrates a certified KMS state and evaluates Conditions I and II
/// on the result. Failing conditions are reported in the certificate,
/// not as errors.
pub fn pair_from_kms(
    model: &AlgebraModel,
    phi: &State,
    dynamics: &Dynamics,
    beta: f64,
    tol: f64,
) -> Result<KmsPair, KmsError> {
    let cert = is_kms(model, phi, dynamics, beta, tol);
    if !cert.pass {
        return Err(KmsError::rejected(&cert));
    }
    let d = disintegrate(model, phi, tol)?;
    let g = model.bundle().groupoid();
    let ci = check_condition_i(g, &d.mu, dynamics.cocycle(), beta, tol);
    let cii = check_condition_ii(model, &d.field, &d.mu.support(tol), tol);
    Ok(KmsPair {
        disintegration: d,
        certificate: cert.with_conditions(ci, cii),
    })
}

/// Checks that `model`'s bundle is `r^*A` for `act`.
fn check_pullback(model: &AlgebraModel, act: &GroupoidAction, tol: f64) -> Result<(), KmsError> {
    let b = model.bundle();
    let g = act.groupoid();
    if b.groupoid().num_arrows() != g.num_arrows() {
        return Err(KmsError::NotPullback("arrow count".into()));
    }
    for a in g.arrows() {
        let u = act.unitary(a);
        let alg = act.algebra(g.tgt(a));
        let fib = b.fiber(a);
        if fib.shape() != u.shape()
            || fib.dim() != alg.dim()
            || alg
                .basis()
                .iter()
                .any(|m| !fib.contains(&(m * u), tol.sqrt()))
        {
            return Err(KmsError::NotPullback(g.arrow_name(a).to_string()));
        }
    }
    Ok(())
}

/// The crossed-product trace condition
/// `φ_{s(η)}(a α_{γη^{-1}}(ξ_i^* ξ_j) δ_γ) = φ_{r(η)}(ξ_j α_η(a) α_{ηγη^{-1}}(ξ_i^*) δ_{ηγη^{-1}})`
/// for `a ∈ A(x)`, `ξ_i, ξ_j ∈ A(r(η))`, evaluated through `b δ_γ ↦ b U_γ`.
pub fn check_crossed_product_condition(
    model: &AlgebraModel,
    act: &GroupoidAction,
    field: &StateField,
    support: &[UnitId],
    tol: f64,
) -> Result<Check, KmsError> {
    check_pullback(model, act, tol)?;
    let g = act.groupoid();
    let onb: Vec<Vec<CMat>> = g
        .units()
        .map(|x| orthonormalize(act.algebra(x).basis(), tol))
        .collect();
    let mut check = Check::pass();
    for &x in support {
        let iso_x = model.isotropy(x);
        let Some(phi_x) = field.get(x) else {
            check.record(f64::INFINITY, false, || {
                vec![format!("φ undefined at {}", g.unit_name(x))]
            });
            continue;
        };
        for (lg, &gamma) in iso_x.parent.iter().enumerate() {
            for eta in g.source_fiber(x) {
                let y = g.tgt(eta);
                let Some(phi_y) = field.get(y) else {
                    check.record(f64::INFINITY, false, || {
                        vec![format!("φ undefined at {}", g.unit_name(y))]
                    });
                    continue;
                };
                let ge = g.compose(gamma, g.inv(eta)).unwrap();
                let conj = g.compose(eta, ge).unwrap();
                let lc = model
                    .isotropy(y)
                    .local(conj)
                    .expect("conjugate lies in the isotropy at r(η)");
                for (ka, a) in onb[x].iter().enumerate() {
                    let alpha_a = act.alpha(eta, a);
                    for (i, xi) in onb[y].iter().enumerate() {
                        let xi_adj = act.alpha(conj, &xi.adjoint());
                        for (j, xj) in onb[y].iter().enumerate() {
                            let left = a * act.alpha(ge, &(xi.adjoint() * xj));
                            let right = xj * &alpha_a * &xi_adj;
                            let lhs = phi_x.eval_at(lg, &(left * act.unitary(gamma)));
                            let rhs = phi_y.eval_at(lc, &(right * act.unitary(conj)));
                            check.record((lhs - rhs).norm(), approx_eq_c(lhs, rhs, tol), || {
                                vec![
                                    g.unit_name(x).to_string(),
                                    g.arrow_name(gamma).to_string(),
                                    g.arrow_name(eta).to_string(),
                                    format!("a#{ka}"),
                                    format!("ξ#{i}"),
                                    format!("ξ#{j}"),
                                ]
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(check)
}

// ---------------------------------------------------------------------------
// solver

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: crate::linalg::DEFAULT_TOL,
            max_iterations: 5000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KmsCandidate {
    pub mu: UnitMeasure,
    pub field: StateField,
    pub state: State,
    pub certificate: KmsCertificate,
    /// Alternating-projection iterations used for the field.
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KmsSolution {
    pub beta: f64,
    pub candidates: Vec<KmsCandidate>,
    /// Human-readable reasons for missing candidates.
    pub diagnosis: Vec<String>,
}

/// One KMS state per extreme quasi-invariant measure: `μ` from the
/// quasi-invariance solver, `Φ` by alternating projection between the
/// affine constraints (normalisation, centralizer, Condition II) and the
/// positive cone, seeded with normalised traces. Every candidate is
/// re-certified with [`is_kms`]; failures go to `diagnosis`.
pub fn solve_kms(
    model: &AlgebraModel,
    dynamics: &Dynamics,
    beta: f64,
    opts: SolveOptions,
) -> KmsSolution {
    let g = model.bundle().groupoid();
    let tol = opts.tol;
    let qi = solve_quasi_invariant(g, dynamics.cocycle(), beta, tol);
    let mut diagnosis = Vec::new();
    for (orbit, a) in &qi.obstructed {
        let names: Vec<&str> = orbit.iter().map(|&x| g.unit_name(x)).collect();
        diagnosis.push(format!(
            "cycle obstruction: orbit {{{}}} carries no mass (arrow `{}` has βc ≠ 0 around a cycle)",
            names.join(", "),
            g.arrow_name(*a)
        ));
    }
    let mut candidates = Vec::new();
    for mu in qi.extreme_points {
        match solve_field(model, &mu, opts) {
            Ok((field, iterations)) => match kms_from_pair(model, &mu, &field, dynamics, beta, tol)
            {
                Ok((state, certificate)) => candidates.push(KmsCandidate {
                    mu,
                    field,
                    state,
                    certificate,
                    iterations,
                }),
                Err(e) => diagnosis.push(format!("candidate rejected on re-certification: {e}")),
            },
            Err(msg) => diagnosis.push(msg),
        }
    }
    if candidates.is_empty() && diagnosis.is_empty() {
        diagnosis.push("no quasi-invariant probability measure".into());
    }
    KmsSolution {
        beta,
        candidates,
        diagnosis,
    }
}

struct FieldSystem {
    support: Vec<UnitId>,
    offsets: Vec<usize>,
}

impl FieldSystem {
    fn slot(&self, x: UnitId) -> Option<usize> {
        self.support.iter().position(|&u| u == x)
    }

    /// Row coefficients of `v ↦ φ_x(m δ_l)`.
    fn eval_row(
        &self,
        model: &AlgebraModel,
        x: UnitId,
        l: usize,
        m: &CMat,
        scale: C64,
        row: &mut [C64],
    ) {
        let iso = model.isotropy(x);
        let off = self.offsets[self.slot(x).unwrap()];
        for k in iso.model.onb_range(l) {
            let (_, e) = iso.model.onb_element(k);
            row[off + k] += hs_inner(e, m) * scale;
        }
    }
}

fn solve_field(
    model: &AlgebraModel,
    mu: &UnitMeasure,
    opts: SolveOptions,
) -> Result<(StateField, usize), String> {
    let tol = opts.tol;
    let b = model.bundle();
    let g = b.groupoid();
    let support = mu.support(tol);
    let mut offsets = Vec::new();
    let mut n = 0;
    for &x in &support {
        offsets.push(n);
        n += model.isotropy(x).model.dim();
    }
    let sys = FieldSystem { support, offsets };
    let one = C64::new(1.0, 0.0);
    let mut rows: Vec<(Vec<C64>, C64)> = Vec::new();

    for &x in &sys.support {
        let iso = model.isotropy(x);
        let m = &iso.model;
        // normalisation
        let mut row = vec![C64::new(0.0, 0.0); n];
        for (l, u) in m.unit().iter() {
            sys.eval_row(model, x, l, u, one, &mut row);
        }
        rows.push((row, one));
        // A_x in the centralizer
        for k in m.unit_space_basis() {
            for j in 0..m.dim() {
                let e = m.onb_section(j);
                let d = m.convolve(&k, &e).sub(&m.convolve(&e, &k));
                let mut row = vec![C64::new(0.0, 0.0); n];
                for (l, v) in d.iter() {
                    sys.eval_row(model, x, l, v, one, &mut row);
                }
                if row.iter().any(|z| z.norm() > 1e-14) {
                    rows.push((row, C64::new(0.0, 0.0)));
                }
            }
        }
        // Condition II
        for (lg, &gamma) in iso.parent.iter().enumerate() {
            for eta in g.source_fiber(x) {
                let y = g.tgt(eta);
                if sys.slot(y).is_none() {
                    return Err(format!(
                        "measure support is not saturated: `{}` has mass but `{}` does not",
                        g.unit_name(x),
                        g.unit_name(y)
                    ));
                }
                let conj = g
                    .compose(g.compose(eta, gamma).unwrap(), g.inv(eta))
                    .unwrap();
                let lc = model.isotropy(y).local(conj).unwrap();
                let fx = b.fiber(eta).onb();
                for a in b.fiber(gamma).onb() {
                    for xi in fx {
                        for xj in fx {
                            let mut row = vec![C64::new(0.0, 0.0); n];
                            sys.eval_row(model, x, lg, &(a * xi.adjoint() * xj), one, &mut row);
                            sys.eval_row(model, y, lc, &(xj * a * xi.adjoint()), -one, &mut row);
                            if row.iter().any(|z| z.norm() > 1e-14) {
                                rows.push((row, C64::new(0.0, 0.0)));
                            }
                        }
                    }
                }
            }
        }
    }

    // affine set {v : C v = d} = v0 + range(Z), via the normal equations
    let mut cn = CMat::zeros(n, n);
    let mut rhs = CVec::zeros(n);
    for (row, d) in &rows {
        let r = CVec::from_column_slice(row);
        cn += &r.conjugate() * r.transpose();
        rhs += r.conjugate() * *d;
    }
    let (vals, vecs) = hermitian_eigen(&cn);
    let lmax = vals.iter().cloned().fold(0.0, f64::max);
    let cut = 1e-10 * lmax.max(1.0);
    let mut v0 = CVec::zeros(n);
    let mut null_cols = Vec::new();
    for (i, &l) in vals.iter().enumerate() {
        let col = vecs.column(i).into_owned();
        if l > cut {
            v0 += &col * (col.dotc(&rhs) / real(l));
        } else {
            null_cols.push(col);
        }
    }
    let inconsistency = rows
        .iter()
        .map(|(row, d)| (CVec::from_column_slice(row).transpose() * &v0)[0] - d)
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if inconsistency > tol.sqrt() {
        return Err(format!(
            "normalisation, centralizer and Condition II constraints are inconsistent on the support of μ (residual {inconsistency:.3e})"
        ));
    }
    let z = if null_cols.is_empty() {
        CMat::zeros(n, 0)
    } else {
        CMat::from_columns(&null_cols)
    };

    // Gram map v ↦ (φ_x(e_i^* e_j))_x, stacked
    let mut gram_rows = 0;
    let mut blocks = Vec::new();
    for (s, &x) in sys.support.iter().enumerate() {
        let d = model.isotropy(x).model.dim();
        blocks.push((gram_rows, d, sys.offsets[s], x));
        gram_rows += d * d;
    }
    let mut bmat = CMat::zeros(gram_rows, n);
    for &(r0, d, _, x) in &blocks {
        let iso = model.isotropy(x);
        let m = &iso.model;
        let lg = m.bundle().groupoid();
        for i in 0..d {
            let (ai, ei) = m.onb_element(i);
            for j in 0..d {
                let (aj, ej) = m.onb_element(j);
                let c = lg.compose(lg.inv(ai), aj).expect("one-unit groupoid");
                let prod = ei.adjoint() * ej;
                let mut row = vec![C64::new(0.0, 0.0); n];
                sys.eval_row(model, x, c, &prod, one, &mut row);
                for (k, v) in row.into_iter().enumerate() {
                    bmat[(r0 + i * d + j, k)] = v;
                }
            }
        }
    }
    let bz = &bmat * &z;
    let bz_pinv = pinv(&bz, 1e-12);
    let bv0 = &bmat * &v0;
    let affine = |target: &CVec| -> CVec {
        if z.ncols() == 0 {
            v0.clone()
        } else {
            &v0 + &z * (&bz_pinv * (target - &bv0))
        }
    };
    let psd = |m: &CVec| -> (CVec, f64) {
        let mut out = CVec::zeros(m.len());
        let mut worst: f64 = 0.0;
        for &(r0, d, _, _) in &blocks {
            let blk = CMat::from_fn(d, d, |i, j| m[r0 + i * d + j]);
            let (vals, vecs) = hermitian_eigen(&blk);
            let mut p = CMat::zeros(d, d);
            for (k, &l) in vals.iter().enumerate() {
                worst = worst.min(l);
                if l > 0.0 {
                    let c = vecs.column(k);
                    p += &c * c.adjoint() * real(l);
                }
            }
            for i in 0..d {
                for j in 0..d {
                    out[r0 + i * d + j] = p[(i, j)];
                }
            }
        }
        (out, worst)
    };

    // seed: normalised traces
    let mut seed = CVec::zeros(n);
    for (s, &x) in sys.support.iter().enumerate() {
        let m = &model.isotropy(x).model;
        let t = State::unit_trace(m, &[1.0]).onb_values(m);
        seed.rows_mut(sys.offsets[s], m.dim()).copy_from(&t);
    }
    let mut v = affine(&(&bmat * &seed));
    let mut iterations = 0;
    loop {
        let m = &bmat * &v;
        let (p, worst) = psd(&m);
        let herm_gap = blocks
            .iter()
            .map(|&(r0, d, _, _)| {
                let blk = CMat::from_fn(d, d, |i, j| m[r0 + i * d + j]);
                frobenius(&(&blk - blk.adjoint()))
            })
            .fold(0.0, f64::max);
        if worst >= -tol * 1e-2 && herm_gap <= tol * 1e-2 {
            break;
        }
        if iterations >= opts.max_iterations {
            return Err(format!(
                "alternating projection did not converge after {iterations} iterations (min eigenvalue {worst:.3e})"
            ));
        }
        v = affine(&p);
        iterations += 1;
    }
    let field = StateField::from_states(sys.support.iter().enumerate().map(|(s, &x)| {
        let m = &model.isotropy(x).model;
        let vals = v.rows(sys.offsets[s], m.dim()).into_owned();
        (x, State::from_onb_values(m, &vals))
    }));
    Ok((field, iterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fellbundle::{pullback_bundle, trivial_bundle, FellBundle, Fiber, MatrixAlgebra};
    use crate::groupoid::{cyclic_group, pair_groupoid};
    use crate::linalg::{approx_eq, identity, matrix_unit};
    use std::sync::Arc;

    fn model(g: FiniteGroupoid, a: &MatrixAlgebra) -> AlgebraModel {
        AlgebraModel::new(Arc::new(trivial_bundle(Arc::new(g), a)), 1e-9).unwrap()
    }

    fn h_minus_k(g: &FiniteGroupoid) -> Cocycle {
        // arrows of the pair groupoid are named (h,*,k)
        Cocycle::from_fn(g, |a| {
            let name = g.arrow_name(a);
            let parts: Vec<&str> = name
                .trim_matches(|c| c == '(' || c == ')')
                .split(',')
                .collect();
            parts[0].parse::<f64>().unwrap() - parts[2].parse::<f64>().unwrap()
        })
    }

    fn gibbs_p2(m: &AlgebraModel) -> State {
        let g = m.bundle().groupoid();
        let one = |v: f64| CMat::from_element(1, 1, real(v));
        State::from_densities(
            m,
            [
                (g.arrow_by_name("(1,*,1)").unwrap(), one(2.0 / 3.0)),
                (g.arrow_by_name("(2,*,2)").unwrap(), one(1.0 / 3.0)),
            ],
        )
    }

    #[test]
    fn gibbs_state_on_p2_is_kms() {
        let m = model(pair_groupoid(2), &MatrixAlgebra::scalars());
        let dynm = Dynamics::new(h_minus_k(m.bundle().groupoid()));
        let beta = 2f64.ln();
        let cert = is_kms(&m, &gibbs_p2(&m), &dynm, beta, 1e-9);
        assert!(cert.pass, "{cert:?}");
        // the uniform state fails with an explicit residual
        let uniform = State::unit_trace(&m, &[0.5, 0.5]);
        let bad = is_kms(&m, &uniform, &dynm, beta, 1e-9);
        assert!(!bad.pass);
        assert!(approx_eq(bad.kms.max_residual, 0.5, 1e-12));
    }

    #[test]
    fn beta_zero_is_the_trace_property() {
        let m = model(pair_groupoid(2), &MatrixAlgebra::scalars());
        let dynm = Dynamics::new(h_minus_k(m.bundle().groupoid()));
        for phi in [gibbs_p2(&m), State::unit_trace(&m, &[0.5, 0.5])] {
            assert_eq!(
                is_kms(&m, &phi, &dynm, 0.0, 1e-9).pass,
                phi.certify(&m, 1e-9).trace
            );
        }
    }

    #[test]
    fn kms_states_are_invariant() {
        let m = model(pair_groupoid(2), &MatrixAlgebra::scalars());
        let dynm = Dynamics::new(h_minus_k(m.bundle().groupoid()));
        let phi = gibbs_p2(&m);
        for k in 0..m.dim() {
            let f = m.onb_section(k);
            let moved = phi.eval(&dynm.sigma_t(&f, 0.7));
            assert!((moved - phi.eval(&f)).norm() < 1e-12);
        }
    }

    #[test]
    fn condition_ii_trace_field_on_m2_bundle() {
        let m = model(pair_groupoid(2), &MatrixAlgebra::full(2));
        let field = StateField::normalized_traces(&m);
        assert!(check_condition_ii(&m, &field, &[0, 1], 1e-9).holds);
        let iso = m.isotropy(0);
        let vector = State::from_densities(&iso.model, [(0, matrix_unit(2, 2, 0, 0))]);
        let mut bad = field.clone();
        bad.insert(0, vector);
        let c = check_condition_ii(&m, &bad, &[0, 1], 1e-9);
        assert!(!c.holds);
        assert_eq!(c.witness.as_ref().unwrap().len(), 6);
    }

    #[test]
    fn pair_round_trip_gibbs() {
        let m = model(pair_groupoid(2), &MatrixAlgebra::scalars());
        let g = m.bundle().groupoid();
        let dynm = Dynamics::new(h_minus_k(g));
        let beta = 2f64.ln();
        let pair = pair_from_kms(&m, &gibbs_p2(&m), &dynm, beta, 1e-9).unwrap();
        assert!(pair.certificate.pass);
        let d = &pair.disintegration;
        let (phi, cert) = kms_from_pair(&m, &d.mu, &d.field, &dynm, beta, 1e-9).unwrap();
        assert!(cert.pass);
        assert!(phi.distance(&gibbs_p2(&m)) < 1e-12);
    }

    #[test]
    fn solver_reproduces_gibbs() {
        let m = model(pair_groupoid(2), &MatrixAlgebra::scalars());
        let dynm = Dynamics::new(h_minus_k(m.bundle().groupoid()));
        let sol = solve_kms(&m, &dynm, 2f64.ln(), SolveOptions::default());
        assert_eq!(sol.candidates.len(), 1);
        assert!(sol.candidates[0].state.distance(&gibbs_p2(&m)) < 1e-12);
    }

    #[test]
    fn solver_reports_cycle_obstruction() {
        let g = cyclic_group(2);
        let c = Cocycle::from_fn(&g, |a| if a == 0 { 0.0 } else { 1.0 });
        let m = model(g, &MatrixAlgebra::scalars());
        let sol = solve_kms(&m, &Dynamics::new(c), 1.0, SolveOptions::default());
        assert!(sol.candidates.is_empty());
        assert!(sol.diagnosis[0].contains("cycle obstruction"));
    }

    #[test]
    fn solver_on_group_with_matrix_fibres() {
        // Z/2 ⊗ M_2 at β = 0: the field must be a trace on C*(Z/2) ⊗ M_2
        let m = model(cyclic_group(2), &MatrixAlgebra::full(2));
        let g = m.bundle().groupoid();
        let sol = solve_kms(
            &m,
            &Dynamics::new(Cocycle::zero(g)),
            0.0,
            SolveOptions::default(),
        );
        assert_eq!(sol.candidates.len(), 1);
        assert!(sol.candidates[0].state.certify(&m, 1e-9).trace);
    }

    /// Over P(2) with `A_(1,1) = M_2` and `A_(2,2) = C`, the C*-algebra is
    /// `M_3`. Its trace is KMS at β = 0, but the unit masses are (2/3, 1/3),
    /// which is not an invariant measure. Condition II fails too, by the
    /// reciprocal factor: only the μ-weighted identity
    /// `μ(x) φ_x(a ξ^*ξ) = μ(y) φ_y(ξ a ξ^*)` survives. Both conditions need
    /// fibres with partial unitaries.
    #[test]
    fn conditions_fail_for_morita_bundle() {
        let g = Arc::new(pair_groupoid(2));
        let a = |s: &str| g.arrow_by_name(s).unwrap();
        let full = |r: usize, c: usize| {
            let basis = (0..r)
                .flat_map(|i| (0..c).map(move |j| matrix_unit(r, c, i, j)))
                .collect();
            Fiber::new(r, c, basis)
        };
        let mut fibers = vec![Fiber::zero(1, 1); 4];
        fibers[a("(1,*,1)")] = full(2, 2);
        fibers[a("(1,*,2)")] = full(2, 1);
        fibers[a("(2,*,1)")] = full(1, 2);
        fibers[a("(2,*,2)")] = full(1, 1);
        let b = FellBundle::new(g.clone(), fibers).unwrap();
        assert!(crate::fellbundle::validate_bundle(&b, 1e-9).is_empty());
        let m = AlgebraModel::new(Arc::new(b), 1e-9).unwrap();
        assert_eq!(m.dim(), 9);
        let tr3 = State::unit_trace(&m, &[2.0 / 3.0, 1.0 / 3.0]);
        let dynm = Dynamics::new(Cocycle::zero(&g));
        let pair = pair_from_kms(&m, &tr3, &dynm, 0.0, 1e-9).unwrap();
        assert!(!pair.certificate.condition_i.as_ref().unwrap().holds);
        assert!(!pair.certificate.condition_ii.as_ref().unwrap().holds);
        assert!(!pair.certificate.pass);
        let d = &pair.disintegration;
        assert!(approx_eq(d.mu.at(0), 2.0 / 3.0, 1e-12));
        let xi = matrix_unit(1, 2, 0, 1);
        let a = matrix_unit(2, 2, 1, 1);
        let lhs = d.mu.at(0)
            * d.field
                .get(0)
                .unwrap()
                .eval_at(0, &(&a * xi.adjoint() * &xi))
                .re;
        let rhs = d.mu.at(1)
            * d.field
                .get(1)
                .unwrap()
                .eval_at(0, &(&xi * &a * xi.adjoint()))
                .re;
        assert!(approx_eq(lhs, rhs, 1e-12) && lhs > 0.0);
    }

    #[test]
    fn crossed_condition_matches_condition_ii_for_swap() {
        // Z/2 acting on C ⊕ C by the swap
        let g = Arc::new(cyclic_group(2));
        let swap = CMat::from_row_slice(2, 2, &[real(0.0), real(1.0), real(1.0), real(0.0)]);
        let act = GroupoidAction::new(
            g.clone(),
            vec![MatrixAlgebra::diagonal(2)],
            vec![identity(2), swap],
        )
        .unwrap();
        let m = AlgebraModel::new(Arc::new(pullback_bundle(&act).unwrap()), 1e-9).unwrap();
        let tr = StateField::normalized_traces(&m);
        let a = check_crossed_product_condition(&m, &act, &tr, &[0], 1e-9).unwrap();
        let b = check_condition_ii(&m, &tr, &[0], 1e-9);
        assert!(a.holds && b.holds);
        // a state weighting one summand is not invariant under the swap
        let iso = m.isotropy(0);
        let skew = State::from_densities(&iso.model, [(0, matrix_unit(2, 2, 0, 0))]);
        let field = StateField::from_states([(0, skew)]);
        let a = check_crossed_product_condition(&m, &act, &field, &[0], 1e-9).unwrap();
        let b = check_condition_ii(&m, &field, &[0], 1e-9);
        assert!(!a.holds && !b.holds);
    }

    #[test]
    fn crossed_condition_rejects_foreign_bundle() {
        let g = Arc::new(cyclic_group(2));
        let act = GroupoidAction::trivial(g.clone(), &MatrixAlgebra::full(2));
        let m = model((*g).clone(), &MatrixAlgebra::scalars());
        let field = StateField::normalized_traces(&m);
        assert!(matches!(
            check_crossed_product_condition(&m, &act, &field, &[0], 1e-9),
            Err(KmsError::NotPullback(_))
        ));
    }
}
