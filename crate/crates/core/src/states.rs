//! Linear functionals and states on `C^*(G; A)`, centralizers, and the
//! integration/disintegration correspondence between states and pairs
//! `(μ, {φ_x})`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conv::{AlgebraModel, IsotropyAlgebra, Section};
use crate::groupoid::{ArrowId, UnitId, UnitMeasure};
use crate::linalg::{
    approx_eq, approx_eq_c, frobenius, hs_inner, min_hermitian_eigenvalue, pinv, CMat, CVec, C64,
};
use crate::report::Check;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatesError {
    #[error("measure is not a probability measure (total {0})")]
    NotProbability(f64),
    #[error("field of states is undefined at `{0}`, which carries positive mass")]
    UndefinedOnSupport(String),
    #[error("centralizer condition fails at {witness:?} (residual {residual:.3e})")]
    Centralizer { witness: Vec<String>, residual: f64 },
    #[error("state does not vanish on `{arrow}` outside the isotropy bundle (|φ| = {value:.3e})")]
    OffIsotropy { arrow: String, value: f64 },
    #[error("mass at `{unit}` is {value}")]
    NegativeMass { unit: String, value: f64 },
    #[error("arrow `{0}` has distinct range and source; not a bundle of groups")]
    NotGroupBundle(String),
    #[error("functional is not positive (min Gram eigenvalue {0:.3e})")]
    NotPositive(f64),
}

/// A linear functional `φ(f) = Σ_γ tr(W_γ^* f(γ))` given by densities
/// `W_γ ∈ A_γ`. Statehood is certified separately.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct State {
    densities: BTreeMap<ArrowId, CMat>,
}

/// Positivity, normalization and trace data of a functional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateCertificate {
    /// Smallest eigenvalue of `M_ij = φ(e_i^* e_j)`.
    pub min_eigenvalue: f64,
    /// `φ(1)` as `[re, im]`.
    pub value_at_unit: [f64; 2],
    pub positive: bool,
    pub normalized: bool,
    pub trace: bool,
}

impl StateCertificate {
    pub fn is_state(&self) -> bool {
        self.positive && self.normalized
    }
}

impl State {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Densities are projected onto their fibres.
    pub fn from_densities(
        model: &AlgebraModel,
        densities: impl IntoIterator<Item = (ArrowId, CMat)>,
    ) -> Self {
        let b = model.bundle();
        let mut out = BTreeMap::new();
        for (a, w) in densities {
            let p = b.fiber(a).project(&w);
            out.entry(a)
                .and_modify(|v: &mut CMat| *v += &p)
                .or_insert(p);
        }
        Self { densities: out }
    }

    /// From values `φ(e_k)` on the orthonormal basis.
    pub fn from_onb_values(model: &AlgebraModel, values: &CVec) -> Self {
        let mut out = BTreeMap::<ArrowId, CMat>::new();
        for k in 0..model.dim() {
            let v = values[k];
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            let (a, e) = model.onb_element(k);
            let term = e * v.conj();
            out.entry(a).and_modify(|w| *w += &term).or_insert(term);
        }
        Self { densities: out }
    }

    /// From values on the declared fibre bases (least squares when a
    /// declared basis is dependent).
    pub fn from_basis_values(model: &AlgebraModel, values: &[C64]) -> Self {
        let b = model.bundle();
        let mut out = BTreeMap::new();
        for a in b.groupoid().arrows() {
            let fib = b.fiber(a);
            let m = fib.basis().len();
            let d = fib.dim();
            if m == 0 || d == 0 {
                continue;
            }
            let v = CVec::from_iterator(m, (0..m).map(|i| values[model.basis_index(a, i)]));
            if v.iter().all(|z| z.norm() == 0.0) {
                continue;
            }
            let mut bm = CMat::zeros(m, d);
            for (i, bi) in fib.basis().iter().enumerate() {
                for (j, e) in fib.onb().iter().enumerate() {
                    bm[(i, j)] = hs_inner(e, bi);
                }
            }
            let wc = pinv(&bm, 1e-12) * v;
            let (r, c) = fib.shape();
            let mut w = CMat::zeros(r, c);
            for (j, e) in fib.onb().iter().enumerate() {
                w += e * wc[j].conj();
            }
            out.insert(a, w);
        }
        Self { densities: out }
    }

    /// `φ(f) = Σ_x w_x tr(f(x)) / tr(1_{A_x})`, a trace-like state supported
    /// on unit arrows; a state when the weights form a probability vector.
    pub fn unit_trace(model: &AlgebraModel, weights: &[f64]) -> Self {
        let g = model.bundle().groupoid();
        let mut out = BTreeMap::new();
        for x in g.units() {
            if weights[x] == 0.0 {
                continue;
            }
            let u = g.unit_arrow(x);
            let p = model.unit().value(model.bundle(), u);
            let t = p.trace().re;
            out.insert(u, p * C64::new(weights[x] / t, 0.0));
        }
        Self { densities: out }
    }

    pub fn density(&self, a: ArrowId) -> Option<&CMat> {
        self.densities.get(&a)
    }

    pub fn densities(&self) -> impl Iterator<Item = (ArrowId, &CMat)> {
        self.densities.iter().map(|(a, m)| (*a, m))
    }

    pub fn eval(&self, f: &Section) -> C64 {
        f.iter()
            .filter_map(|(a, m)| self.densities.get(&a).map(|w| hs_inner(w, m)))
            .sum()
    }

    /// `φ(e_i^* e_j)` for two orthonormal basis elements.
    fn pair_value(&self, model: &AlgebraModel, i: usize, j: usize) -> C64 {
        let g = model.bundle().groupoid();
        let (ai, ei) = model.onb_element(i);
        let (aj, ej) = model.onb_element(j);
        if g.tgt(ai) != g.tgt(aj) {
            return C64::new(0.0, 0.0);
        }
        let c = g.compose(g.inv(ai), aj).expect("r(a_i) = r(a_j)");
        match self.densities.get(&c) {
            Some(w) => hs_inner(w, &(ei.adjoint() * ej)),
            None => C64::new(0.0, 0.0),
        }
    }

    /// `φ(e_i e_j)` for two orthonormal basis elements.
    pub fn product_value(&self, model: &AlgebraModel, i: usize, j: usize) -> C64 {
        let g = model.bundle().groupoid();
        let (ai, ei) = model.onb_element(i);
        let (aj, ej) = model.onb_element(j);
        match g.compose(ai, aj).and_then(|c| self.densities.get(&c)) {
            Some(w) => hs_inner(w, &(ei * ej)),
            None => C64::new(0.0, 0.0),
        }
    }

    /// `φ(m δ_a)` for a single fibre element.
    pub fn eval_at(&self, a: ArrowId, m: &CMat) -> C64 {
        self.densities
            .get(&a)
            .map_or(C64::new(0.0, 0.0), |w| hs_inner(w, m))
    }

    pub fn onb_values(&self, model: &AlgebraModel) -> CVec {
        CVec::from_iterator(
            model.dim(),
            (0..model.dim()).map(|k| {
                let (a, e) = model.onb_element(k);
                self.densities
                    .get(&a)
                    .map_or(C64::new(0.0, 0.0), |w| hs_inner(w, e))
            }),
        )
    }

    /// Values on the declared bases, in the model's basis order.
    pub fn basis_values(&self, model: &AlgebraModel) -> Vec<C64> {
        let b = model.bundle();
        model
            .basis()
            .iter()
            .map(|&(a, i)| {
                self.densities
                    .get(&a)
                    .map_or(C64::new(0.0, 0.0), |w| hs_inner(w, &b.fiber(a).basis()[i]))
            })
            .collect()
    }

    /// Gram matrix `M_ij = φ(e_i^* e_j)` on the orthonormal basis.
    pub fn gram(&self, model: &AlgebraModel) -> CMat {
        let n = model.dim();
        CMat::from_fn(n, n, |i, j| self.pair_value(model, i, j))
    }

    pub fn value_at_unit(&self, model: &AlgebraModel) -> C64 {
        self.eval(model.unit())
    }

    /// `φ(e_i e_j) = φ(e_j e_i)` over all orthonormal basis pairs.
    pub fn trace_check(&self, model: &AlgebraModel, tol: f64) -> Check {
        let mut check = Check::pass();
        for i in 0..model.dim() {
            for j in i + 1..model.dim() {
                let lhs = self.product_value(model, i, j);
                let rhs = self.product_value(model, j, i);
                check.record((lhs - rhs).norm(), approx_eq_c(lhs, rhs, tol), || {
                    vec![describe(model, i), describe(model, j)]
                });
            }
        }
        check
    }

    pub fn certify(&self, model: &AlgebraModel, tol: f64) -> StateCertificate {
        let min_eigenvalue = min_hermitian_eigenvalue(&self.gram(model));
        let u = self.value_at_unit(model);
        StateCertificate {
            min_eigenvalue,
            value_at_unit: [u.re, u.im],
            positive: min_eigenvalue >= -tol,
            normalized: approx_eq_c(u, C64::new(1.0, 0.0), tol),
            trace: self.trace_check(model, tol).holds,
        }
    }

    pub fn scale(&self, k: f64) -> State {
        State {
            densities: self
                .densities
                .iter()
                .map(|(a, w)| (*a, w * C64::new(k, 0.0)))
                .collect(),
        }
    }

    /// Largest Frobenius distance between densities, i.e. the largest
    /// difference of values on a unit-norm fibre element.
    pub fn distance(&self, other: &State) -> f64 {
        let keys: std::collections::BTreeSet<ArrowId> = self
            .densities
            .keys()
            .chain(other.densities.keys())
            .copied()
            .collect();
        keys.into_iter()
            .map(
                |a| match (self.densities.get(&a), other.densities.get(&a)) {
                    (Some(x), Some(y)) => frobenius(&(x - y)),
                    (Some(x), None) | (None, Some(x)) => frobenius(x),
                    (None, None) => 0.0,
                },
            )
            .fold(0.0, f64::max)
    }

    /// `φ ∘ (extension by zero)` as a functional on an isotropy algebra.
    pub fn restrict_to(&self, iso: &IsotropyAlgebra) -> State {
        State {
            densities: self
                .densities
                .iter()
                .filter_map(|(a, w)| iso.local(*a).map(|l| (l, w.clone())))
                .collect(),
        }
    }

    /// Transport of a functional on an isotropy algebra to the ambient
    /// arrows.
    pub fn extend_from(&self, iso: &IsotropyAlgebra) -> State {
        State {
            densities: self
                .densities
                .iter()
                .map(|(l, w)| (iso.parent[*l], w.clone()))
                .collect(),
        }
    }
}

pub(crate) fn describe(model: &AlgebraModel, k: usize) -> String {
    let (a, _) = model.onb_element(k);
    format!(
        "{}#{}",
        model.bundle().groupoid().arrow_name(a),
        k - model.onb_range(a).start
    )
}

/// Whether `φ(k g) = φ(g k)` for all `k` in `sub` and all orthonormal basis
/// elements `g`.
pub fn centralizer_contains(model: &AlgebraModel, phi: &State, sub: &[Section], tol: f64) -> Check {
    let mut check = Check::pass();
    for (i, k) in sub.iter().enumerate() {
        for j in 0..model.dim() {
            let g = model.onb_section(j);
            let lhs = phi.eval(&model.convolve(k, &g));
            let rhs = phi.eval(&model.convolve(&g, k));
            check.record((lhs - rhs).norm(), approx_eq_c(lhs, rhs, tol), || {
                vec![format!("sub[{i}]"), describe(model, j)]
            });
        }
    }
    check
}

/// A family `x ↦ φ_x` of functionals on the isotropy algebras
/// `C^*(G^x_x; A(x))`, defined on a subset of units.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StateField {
    states: BTreeMap<UnitId, State>,
}

impl StateField {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_states(states: impl IntoIterator<Item = (UnitId, State)>) -> Self {
        Self {
            states: states.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, x: UnitId, phi: State) {
        self.states.insert(x, phi);
    }

    pub fn get(&self, x: UnitId) -> Option<&State> {
        self.states.get(&x)
    }

    pub fn iter(&self) -> impl Iterator<Item = (UnitId, &State)> {
        self.states.iter().map(|(x, s)| (*x, s))
    }

    pub fn support(&self) -> Vec<UnitId> {
        self.states.keys().copied().collect()
    }

    /// Largest distance between members over `units`; infinite if either
    /// side is undefined somewhere on `units`.
    pub fn distance_on(&self, other: &StateField, units: &[UnitId]) -> f64 {
        units
            .iter()
            .map(|x| match (self.get(*x), other.get(*x)) {
                (Some(a), Some(b)) => a.distance(b),
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }

    /// `φ_x` for every unit, by fibre-normalised traces.
    pub fn normalized_traces(model: &AlgebraModel) -> Self {
        let g = model.bundle().groupoid();
        Self::from_states(g.units().map(|x| {
            let iso = model.isotropy(x);
            (x, State::unit_trace(&iso.model, &[1.0]))
        }))
    }
}

/// Haar average of `φ` over the unitaries of the unit-space algebra
/// `⊕_x A_x`. In the values `φ(e_k)` this is the orthogonal projection onto
/// the states whose centralizer contains every `A_x`.
pub fn unit_space_average(model: &AlgebraModel, phi: &State) -> State {
    let n = model.dim();
    let mut rows = Vec::new();
    for k in model.unit_space_basis() {
        for j in 0..n {
            let e = model.onb_section(j);
            let d = model.convolve(&k, &e).sub(&model.convolve(&e, &k));
            let mut row = CVec::zeros(n);
            for (a, m) in d.iter() {
                for i in model.onb_range(a) {
                    row[i] += hs_inner(model.onb_element(i).1, m);
                }
            }
            rows.push(row.transpose());
        }
    }
    let v = phi.onb_values(model);
    if rows.is_empty() {
        return phi.clone();
    }
    let c = CMat::from_rows(&rows);
    let p = pinv(&c, 1e-10);
    State::from_onb_values(model, &(&v - p * (c * &v)))
}

/// Checks `A_x ⊆ centralizer(φ_x)` in the isotropy algebra.
pub fn fiber_centralizer_check(iso: &IsotropyAlgebra, phi: &State, tol: f64) -> Check {
    let m = &iso.model;
    centralizer_contains(m, phi, &m.unit_space_basis(), tol)
}

/// `φ(f) = Σ_x μ(x) Σ_{γ ∈ G^x_x} φ_x(f(γ) δ_γ)`.
pub fn integrate(
    model: &AlgebraModel,
    mu: &UnitMeasure,
    field: &StateField,
    tol: f64,
) -> Result<State, StatesError> {
    let g = model.bundle().groupoid();
    if !mu.is_probability(tol) {
        return Err(StatesError::NotProbability(mu.total()));
    }
    let mut out = BTreeMap::new();
    for x in mu.support(tol) {
        let phi_x = field
            .get(x)
            .ok_or_else(|| StatesError::UndefinedOnSupport(g.unit_name(x).to_string()))?;
        let iso = model.isotropy(x);
        let c = fiber_centralizer_check(iso, phi_x, tol);
        if !c.holds {
            let mut witness = vec![g.unit_name(x).to_string()];
            witness.extend(c.witness.unwrap_or_default());
            return Err(StatesError::Centralizer {
                witness,
                residual: c.max_residual,
            });
        }
        for (l, w) in phi_x.densities() {
            out.insert(iso.parent[l], w * C64::new(mu.at(x), 0.0));
        }
    }
    let phi = State { densities: out };
    let post = centralizer_contains(model, &phi, &model.unit_space_basis(), tol);
    if !post.holds {
        return Err(StatesError::Centralizer {
            witness: post.witness.unwrap_or_default(),
            residual: post.max_residual,
        });
    }
    Ok(phi)
}

/// A measure on the units together with a field of states.
#[derive(Clone, Debug, PartialEq)]
pub struct Disintegration {
    pub mu: UnitMeasure,
    pub field: StateField,
}

fn unit_masses(model: &AlgebraModel, phi: &State, tol: f64) -> Result<Vec<f64>, StatesError> {
    let b = model.bundle();
    let g = b.groupoid();
    g.units()
        .map(|x| {
            let u = g.unit_arrow(x);
            let v = phi.eval(&Section::delta(u, model.unit().value(b, u)));
            if v.re < -tol || v.im.abs() > tol * 1f64.max(v.re.abs()) {
                return Err(StatesError::NegativeMass {
                    unit: g.unit_name(x).to_string(),
                    value: v.re,
                });
            }
            Ok(v.re.max(0.0))
        })
        .collect()
}

/// Inverse of [`integrate`]: `μ(x) = φ(1_{A_x} δ_x)` and
/// `φ_x(a δ_γ) = φ(a δ_γ)/μ(x)` on the isotropy at `x`.
pub fn disintegrate(
    model: &AlgebraModel,
    phi: &State,
    tol: f64,
) -> Result<Disintegration, StatesError> {
    let b = model.bundle();
    let g = b.groupoid();
    let pre = centralizer_contains(model, phi, &model.unit_space_basis(), tol);
    if !pre.holds {
        return Err(StatesError::Centralizer {
            witness: pre.witness.unwrap_or_default(),
            residual: pre.max_residual,
        });
    }
    for (a, w) in phi.densities() {
        if g.src(a) != g.tgt(a) {
            let v = frobenius(w);
            if v > tol {
                return Err(StatesError::OffIsotropy {
                    arrow: g.arrow_name(a).to_string(),
                    value: v,
                });
            }
        }
    }
    let weights = unit_masses(model, phi, tol)?;
    let mu = UnitMeasure::new(g, weights).expect("masses are nonnegative");
    let mut field = StateField::new();
    for x in mu.support(tol) {
        let iso = model.isotropy(x);
        let phi_x = phi.restrict_to(iso).scale(1.0 / mu.at(x));
        let c = fiber_centralizer_check(iso, &phi_x, tol);
        if !c.holds {
            let mut witness = vec![g.unit_name(x).to_string()];
            witness.extend(c.witness.unwrap_or_default());
            return Err(StatesError::Centralizer {
                witness,
                residual: c.max_residual,
            });
        }
        field.insert(x, phi_x);
    }
    Ok(Disintegration { mu, field })
}

/// Decomposition of a state on a bundle of groups (a `C(G^(0))`-algebra
/// with fibres `C^*(G^x_x; A(x))`).
#[derive(Clone, Debug, PartialEq)]
pub struct C0xDecomposition {
    pub mu: UnitMeasure,
    pub field: StateField,
    /// Trace flag of each `φ_x` on the support.
    pub fiber_traces: BTreeMap<UnitId, bool>,
    pub global_trace: bool,
    /// `max_k |φ(e_k) - Σ_x μ(x) φ_x(e_k|_x)|` over the orthonormal basis.
    pub deviation: f64,
}

/// No centralizer hypothesis: on a bundle of groups every unit-space
/// element is central.
pub fn decompose_c0x_state(
    model: &AlgebraModel,
    phi: &State,
    tol: f64,
) -> Result<C0xDecomposition, StatesError> {
    let g = model.bundle().groupoid();
    if let Some(a) = g.arrows().find(|&a| g.src(a) != g.tgt(a)) {
        return Err(StatesError::NotGroupBundle(g.arrow_name(a).to_string()));
    }
    let weights = unit_masses(model, phi, tol)?;
    let mu = UnitMeasure::new(g, weights).expect("masses are nonnegative");
    let mut field = StateField::new();
    let mut fiber_traces = BTreeMap::new();
    for x in mu.support(tol) {
        let iso = model.isotropy(x);
        let phi_x = phi.restrict_to(iso).scale(1.0 / mu.at(x));
        fiber_traces.insert(x, phi_x.trace_check(&iso.model, tol).holds);
        field.insert(x, phi_x);
    }
    let mut deviation: f64 = 0.0;
    for k in 0..model.dim() {
        let (a, e) = model.onb_element(k);
        let direct = phi
            .density(a)
            .map_or(C64::new(0.0, 0.0), |w| hs_inner(w, e));
        let x = g.src(a);
        let recon = match field.get(x) {
            Some(phi_x) => {
                let iso = model.isotropy(x);
                let l = iso.local(a).expect("group bundle arrow is isotropy");
                let v = phi_x.eval(&Section::delta(l, e.clone()));
                v * C64::new(mu.at(x), 0.0)
            }
            None => C64::new(0.0, 0.0),
        };
        deviation = deviation.max((direct - recon).norm());
    }
    let global_trace = phi.trace_check(model, tol).holds;
    Ok(C0xDecomposition {
        mu,
        field,
        fiber_traces,
        global_trace,
        deviation,
    })
}

/// Probability check with the crate's mixed tolerance.
pub fn is_probability_vector(w: &[f64], tol: f64) -> bool {
    w.iter().all(|&v| v >= -tol) && approx_eq(w.iter().sum(), 1.0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fellbundle::{trivial_bundle, MatrixAlgebra};
    use crate::groupoid::{cyclic_group, group_bundle, pair_groupoid};
    use crate::linalg::{matrix_unit, real};
    use std::sync::Arc;

    fn model_of(g: crate::groupoid::FiniteGroupoid, a: &MatrixAlgebra) -> AlgebraModel {
        AlgebraModel::new(Arc::new(trivial_bundle(Arc::new(g), a)), 1e-9).unwrap()
    }

    fn p2() -> AlgebraModel {
        model_of(pair_groupoid(2), &MatrixAlgebra::scalars())
    }

    fn arrow(m: &AlgebraModel, name: &str) -> ArrowId {
        m.bundle().groupoid().arrow_by_name(name).unwrap()
    }

    fn scalar(v: f64) -> CMat {
        CMat::from_element(1, 1, real(v))
    }

    fn diag_state(m: &AlgebraModel) -> State {
        State::from_densities(
            m,
            [
                (arrow(m, "(1,*,1)"), scalar(2.0 / 3.0)),
                (arrow(m, "(2,*,2)"), scalar(1.0 / 3.0)),
            ],
        )
    }

    #[test]
    fn diagonal_state_is_a_state() {
        let m = p2();
        let cert = diag_state(&m).certify(&m, 1e-9);
        assert!(cert.is_state());
        assert!(!cert.trace);
    }

    #[test]
    fn integrate_principal_p2() {
        let m = p2();
        let g = m.bundle().groupoid();
        let mu = UnitMeasure::new(g, vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let field = StateField::normalized_traces(&m);
        let phi = integrate(&m, &mu, &field, 1e-9).unwrap();
        assert!(phi.distance(&diag_state(&m)) < 1e-12);
    }

    #[test]
    fn disintegrate_principal_p2() {
        let m = p2();
        let d = disintegrate(&m, &diag_state(&m), 1e-9).unwrap();
        assert!(approx_eq(d.mu.at(0), 2.0 / 3.0, 1e-12));
        assert!(approx_eq(d.mu.at(1), 1.0 / 3.0, 1e-12));
        assert_eq!(d.field.support(), vec![0, 1]);
    }

    #[test]
    fn off_isotropy_mass_is_a_theorem_violation() {
        let m = p2();
        // the vector state of (1,1)/sqrt 2 does not have C(G^(0)) central
        let phi = State::from_densities(
            &m,
            ["(1,*,1)", "(2,*,2)", "(1,*,2)", "(2,*,1)"].map(|a| (arrow(&m, a), scalar(0.5))),
        );
        assert!(phi.certify(&m, 1e-9).is_state());
        assert!(matches!(
            disintegrate(&m, &phi, 1e-9),
            Err(StatesError::Centralizer { .. })
        ));
    }

    #[test]
    fn z2_trace_disintegrates_to_point_mass() {
        let m = model_of(cyclic_group(2), &MatrixAlgebra::scalars());
        let e = arrow(&m, "e");
        let phi = State::from_densities(&m, [(e, scalar(1.0))]);
        let cert = phi.certify(&m, 1e-9);
        assert!(cert.is_state() && cert.trace);
        let d = disintegrate(&m, &phi, 1e-9).unwrap();
        assert!(approx_eq(d.mu.at(0), 1.0, 1e-12));
        let phi_x = d.field.get(0).unwrap();
        assert!(phi_x.distance(&phi) < 1e-12);
    }

    #[test]
    fn character_state_on_z2() {
        // φ(δ_e) = φ(δ_g) = 1 is the trivial character
        let m = model_of(cyclic_group(2), &MatrixAlgebra::scalars());
        let phi = State::from_basis_values(&m, &[real(1.0), real(1.0)]);
        let cert = phi.certify(&m, 1e-9);
        assert!(cert.is_state());
        assert!(approx_eq(cert.min_eigenvalue, 0.0, 1e-9));
    }

    #[test]
    fn vector_state_on_m2_is_not_tracial() {
        let m = model_of(
            crate::groupoid::trivial_groupoid(&["x".into()]),
            &MatrixAlgebra::full(2),
        );
        let u = m.bundle().groupoid().unit_arrow(0);
        let phi = State::from_densities(&m, [(u, matrix_unit(2, 2, 0, 0))]);
        let check = phi.trace_check(&m, 1e-9);
        assert!(!check.holds);
        assert!(check.witness.is_some());
        let tr = State::unit_trace(&m, &[1.0]);
        assert!(tr.trace_check(&m, 1e-9).holds);
    }

    #[test]
    fn integrate_rejects_missing_member() {
        let m = p2();
        let g = m.bundle().groupoid();
        let mu = UnitMeasure::new(g, vec![0.5, 0.5]).unwrap();
        let field = StateField::from_states([(0, State::unit_trace(&m.isotropy(0).model, &[1.0]))]);
        assert!(matches!(
            integrate(&m, &mu, &field, 1e-9),
            Err(StatesError::UndefinedOnSupport(_))
        ));
    }

    #[test]
    fn group_bundle_integration_is_plug_in() {
        let g = group_bundle(&[2, 2], &["x".into(), "y".into()]);
        let m = model_of(g, &MatrixAlgebra::scalars());
        let gr = m.bundle().groupoid();
        let mu = UnitMeasure::new(gr, vec![0.5, 0.5]).unwrap();
        let field = StateField::from_states(gr.units().map(|x| {
            let iso = m.isotropy(x);
            (
                x,
                State::from_basis_values(&iso.model, &[real(1.0), real(1.0)]),
            )
        }));
        let phi = integrate(&m, &mu, &field, 1e-9).unwrap();
        for v in phi.basis_values(&m) {
            assert!(approx_eq_c(v, real(0.5), 1e-12));
        }
        let dec = decompose_c0x_state(&m, &phi, 1e-9).unwrap();
        assert!(dec.deviation < 1e-12);
        assert!(dec.fiber_traces.values().all(|t| *t));
    }

    #[test]
    fn decompose_direct_sum_m2_m3() {
        let g = crate::groupoid::trivial_groupoid(&["x".into(), "y".into()]);
        let algebras = [MatrixAlgebra::full(2), MatrixAlgebra::full(3)];
        let b = crate::fellbundle::pullback_bundle(
            &crate::fellbundle::GroupoidAction::new(
                Arc::new(g.clone()),
                algebras.to_vec(),
                g.arrows()
                    .map(|a| crate::linalg::identity(algebras[g.src(a)].ambient_dim()))
                    .collect(),
            )
            .unwrap(),
        )
        .unwrap();
        let m = AlgebraModel::new(Arc::new(b), 1e-9).unwrap();
        let phi = State::unit_trace(&m, &[0.25, 0.75]);
        let dec = decompose_c0x_state(&m, &phi, 1e-9).unwrap();
        assert!(approx_eq(dec.mu.at(0), 0.25, 1e-12));
        assert!(dec.global_trace);
        assert!(dec.fiber_traces.values().all(|t| *t));
        assert!(dec.deviation < 1e-12);
    }

    #[test]
    fn decompose_rejects_transitive_groupoid() {
        let m = p2();
        assert!(matches!(
            decompose_c0x_state(&m, &diag_state(&m), 1e-9),
            Err(StatesError::NotGroupBundle(_))
        ));
    }
}
