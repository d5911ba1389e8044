//! Concrete models: the pair groupoid `N × X × N` and transformation
//! groupoids of G-spaces.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conv::{structure_map, AlgebraModel, ConvError, PairShape, Section};
use crate::fellbundle::{
    pullback_bundle, trivial_bundle, BundleError, FellBundle, GroupoidAction, MatrixAlgebra,
};
use crate::groupoid::{
    check_quasi_invariant, Arrow, ArrowId, Cocycle, FiniteGroupoid, GroupoidError, UnitId,
    UnitMeasure,
};
use crate::kms::{
    check_condition_i, check_condition_ii, is_kms, kms_from_pair, Dynamics, KmsCertificate,
    KmsError,
};
use crate::linalg::{approx_eq, matrix_unit, real, CMat, C64};
use crate::report::Check;
use crate::states::{disintegrate, State, StateField, StatesError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("pair model needs n >= 1 and a nonempty point set")]
    EmptyModel,
    #[error("μ₁ has {got} weights for {expected} points")]
    Mu1Length { expected: usize, got: usize },
    #[error("μ₁ must be nonnegative and not identically zero")]
    ZeroMeasure,
    #[error("measure is not quasi-invariant: arrow `{arrow}` off by {residual:.3e}")]
    NotQuasiInvariant { arrow: String, residual: f64 },
    #[error("field of states fails the trace condition at {witness:?} (residual {residual:.3e})")]
    ConditionFails { witness: Vec<String>, residual: f64 },
    #[error("expected {expected} densities, got {got}")]
    FieldLength { expected: usize, got: usize },
    #[error("invalid G-space: {0}")]
    InvalidAction(String),
    #[error(transparent)]
    Groupoid(#[from] GroupoidError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Conv(#[from] ConvError),
    #[error(transparent)]
    States(#[from] StatesError),
    #[error(transparent)]
    Kms(#[from] KmsError),
}

/// `N × X × N` with units `(k,x)`, arrows `(h,x,k)` from `(k,x)` to `(h,x)`.
pub fn pair_model_groupoid(n: usize, xs: &[String]) -> FiniteGroupoid {
    assert!(
        n >= 1 && !xs.is_empty(),
        "pair model needs n >= 1 and nonempty X"
    );
    let m = xs.len();
    // unit (k, x) -> k * m + x ; arrow (h, x, k) -> (h * m + x) * n + k
    let units = (0..n)
        .flat_map(|k| xs.iter().map(move |x| format!("({},{x})", k + 1)))
        .collect();
    let unit = |k: usize, x: usize| k * m + x;
    let idx = |h: usize, x: usize, k: usize| (h * m + x) * n + k;
    let mut arrows = Vec::with_capacity(n * n * m);
    let mut triple = Vec::with_capacity(n * n * m);
    for h in 0..n {
        for (x, xn) in xs.iter().enumerate() {
            for k in 0..n {
                arrows.push(Arrow {
                    id: format!("({},{xn},{})", h + 1, k + 1),
                    src: unit(k, x),
                    tgt: unit(h, x),
                });
                triple.push((h, x, k));
            }
        }
    }
    let inv = triple.iter().map(|&(h, x, k)| idx(k, x, h)).collect();
    let unit_arrow = (0..n)
        .flat_map(|k| (0..m).map(move |x| idx(k, x, k)))
        .collect();
    FiniteGroupoid::from_indexed(
        units,
        arrows,
        |a, b| {
            let ((h, x, m1), (m2, y, k)) = (triple[a], triple[b]);
            (x == y && m1 == m2).then(|| idx(h, x, k))
        },
        inv,
        unit_arrow,
    )
    .expect("pair model tables are consistent")
}

/// The pair model `N × X × N` with coefficient algebra `A`, whose
/// C*-algebra is `M_n(C(X)) ⊗ A`.
#[derive(Clone, Debug)]
pub struct PairModel {
    pub n: usize,
    pub points: Vec<String>,
    pub algebra: MatrixAlgebra,
    pub model: AlgebraModel,
}

impl PairModel {
    pub fn groupoid(&self) -> &FiniteGroupoid {
        self.model.bundle().groupoid()
    }

    pub fn bundle(&self) -> &FellBundle {
        self.model.bundle()
    }

    /// Unit `(k, x)`, `k` zero-based.
    pub fn unit(&self, k: usize, x: usize) -> UnitId {
        k * self.points.len() + x
    }

    /// Arrow `(h, x, k)` from `(k, x)` to `(h, x)`, zero-based.
    pub fn arrow(&self, h: usize, x: usize, k: usize) -> ArrowId {
        (h * self.points.len() + x) * self.n + k
    }

    /// `(h, x, k)` of an arrow.
    pub fn triple(&self, a: ArrowId) -> (usize, usize, usize) {
        let m = self.points.len();
        (a / self.n / m, (a / self.n) % m, a % self.n)
    }

    /// One `n·d × n·d` matrix per point.
    pub fn to_matrices(&self, f: &Section) -> Vec<CMat> {
        let shape = PairShape::detect(self.bundle()).expect("pair model has pair shape");
        structure_map(self.bundle(), &shape, f)
    }
}

pub fn build_pair_model(
    n: usize,
    points: &[String],
    algebra: &MatrixAlgebra,
    tol: f64,
) -> Result<PairModel, ModelError> {
    if n == 0 || points.is_empty() {
        return Err(ModelError::EmptyModel);
    }
    let g = Arc::new(pair_model_groupoid(n, points));
    let model = AlgebraModel::new(Arc::new(trivial_bundle(g, algebra)), tol)?;
    Ok(PairModel {
        n,
        points: points.to_vec(),
        algebra: algebra.clone(),
        model,
    })
}

/// `c(h, x, k) = h − k`.
pub fn h_minus_k(pm: &PairModel) -> Cocycle {
    Cocycle::from_fn(pm.groupoid(), |a| {
        let (h, _, k) = pm.triple(a);
        h as f64 - k as f64
    })
}

/// `μ_k(x) = e^{-βc(k,x,1)} μ₁(x)`, summed over `k` and normalised.
pub fn measure_from_mu1(
    pm: &PairModel,
    mu1: &[f64],
    c: &Cocycle,
    beta: f64,
) -> Result<UnitMeasure, ModelError> {
    let m = pm.points.len();
    if mu1.len() != m {
        return Err(ModelError::Mu1Length {
            expected: m,
            got: mu1.len(),
        });
    }
    if mu1.iter().any(|w| !(*w >= 0.0)) || mu1.iter().sum::<f64>() <= 0.0 {
        return Err(ModelError::ZeroMeasure);
    }
    let mut w = vec![0.0; pm.n * m];
    for k in 0..pm.n {
        for (x, &v) in mu1.iter().enumerate() {
            w[pm.unit(k, x)] = (-beta * c.at(pm.arrow(k, x, 0))).exp() * v;
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(UnitMeasure::new(pm.groupoid(), w)?)
}

/// Restriction of a quasi-invariant `ν` to `{1} × X`.
pub fn mu1_from_measure(
    pm: &PairModel,
    nu: &UnitMeasure,
    c: &Cocycle,
    beta: f64,
    tol: f64,
) -> Result<Vec<f64>, ModelError> {
    let g = pm.groupoid();
    let q = check_quasi_invariant(g, nu, &c.modular(beta), tol);
    if !q.holds {
        return Err(ModelError::NotQuasiInvariant {
            arrow: g.arrow_name(q.witness.unwrap()).to_string(),
            residual: q.max_residual,
        });
    }
    Ok((0..pm.points.len()).map(|x| nu.at(pm.unit(0, x))).collect())
}

/// Both sides of `Σ_γ f(γ) ν(r(γ)) = Σ_γ f(γ) e^{-βc(γ)} ν(s(γ))`.
pub fn quasi_invariance_sides(
    g: &FiniteGroupoid,
    nu: &UnitMeasure,
    c: &Cocycle,
    beta: f64,
    f: &[f64],
) -> (f64, f64) {
    let delta = c.modular(beta);
    let lhs = g.arrows().map(|a| f[a] * nu.at(g.tgt(a))).sum();
    let rhs = g.arrows().map(|a| f[a] * delta[a] * nu.at(g.src(a))).sum();
    (lhs, rhs)
}

/// The KMS state of `M_n(C(X)) ⊗ A` built from `μ₁` and states on `A`
/// given as densities, one per unit `(k, x)` (indexed by unit id).
pub fn kms_states_matrix_model(
    pm: &PairModel,
    mu1: &[f64],
    densities: &[CMat],
    c: &Cocycle,
    beta: f64,
    tol: f64,
) -> Result<(State, KmsCertificate), ModelError> {
    let g = pm.groupoid();
    if densities.len() != g.num_units() {
        return Err(ModelError::FieldLength {
            expected: g.num_units(),
            got: densities.len(),
        });
    }
    let nu = measure_from_mu1(pm, mu1, c, beta)?;
    let support = nu.support(tol);
    let field = StateField::from_states(support.iter().map(|&u| {
        let iso = pm.model.isotropy(u);
        (
            u,
            State::from_densities(&iso.model, [(0, densities[u].clone())]),
        )
    }));
    let cii = check_condition_ii(&pm.model, &field, &support, tol);
    if !cii.holds {
        return Err(ModelError::ConditionFails {
            witness: cii.witness.unwrap_or_default(),
            residual: cii.max_residual,
        });
    }
    Ok(kms_from_pair(
        &pm.model,
        &nu,
        &field,
        &Dynamics::new(c.clone()),
        beta,
        tol,
    )?)
}

// ---------------------------------------------------------------------------
// G-spaces

/// A finite right G-space: points with momentum map `m: X → G^(0)` and a
/// partial action `x·γ`, defined when `m(x) = r(γ)`.
#[derive(Clone, Debug)]
pub struct GSpace {
    groupoid: Arc<FiniteGroupoid>,
    points: Vec<String>,
    momentum: Vec<UnitId>,
    table: BTreeMap<(usize, ArrowId), usize>,
}

impl GSpace {
    /// Validates the action table `(x, γ) ↦ x·γ`.
    pub fn new(
        groupoid: Arc<FiniteGroupoid>,
        points: Vec<String>,
        momentum: Vec<UnitId>,
        table: BTreeMap<(usize, ArrowId), usize>,
    ) -> Result<Self, ModelError> {
        let gs = Self {
            groupoid,
            points,
            momentum,
            table,
        };
        gs.validate()?;
        Ok(gs)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let g = &*self.groupoid;
        let bad = |msg: String| Err(ModelError::InvalidAction(msg));
        if self.momentum.len() != self.points.len() {
            return bad("momentum map length differs from the point count".into());
        }
        if self.momentum.iter().any(|&u| u >= g.num_units()) {
            return bad("momentum map leaves the unit space".into());
        }
        for u in g.units() {
            if !self.momentum.contains(&u) {
                return bad(format!("unit `{}` has an empty fibre", g.unit_name(u)));
            }
        }
        for (&(x, a), &y) in &self.table {
            if x >= self.points.len() || y >= self.points.len() || a >= g.num_arrows() {
                return bad(format!("table entry ({x}, {a}) ↦ {y} out of range"));
            }
            if g.tgt(a) != self.momentum[x] {
                return bad(format!(
                    "{}·{} defined but m(x) != r(γ)",
                    self.points[x],
                    g.arrow_name(a)
                ));
            }
        }
        for x in 0..self.points.len() {
            for a in g.range_fiber(self.momentum[x]) {
                let Some(y) = self.act(x, a) else {
                    return bad(format!("{}·{} undefined", self.points[x], g.arrow_name(a)));
                };
                if self.momentum[y] != g.src(a) {
                    return bad(format!("m({}·{}) != s(γ)", self.points[x], g.arrow_name(a)));
                }
                if g.is_unit_arrow(a) && y != x {
                    return bad(format!(
                        "{}·{} != {}",
                        self.points[x],
                        g.arrow_name(a),
                        self.points[x]
                    ));
                }
            }
        }
        for x in 0..self.points.len() {
            for a in g.range_fiber(self.momentum[x]) {
                let y = self.act(x, a).unwrap();
                for b in g.range_fiber(g.src(a)) {
                    let ab = g.compose(a, b).unwrap();
                    if self.act(y, b) != self.act(x, ab) {
                        return bad(format!(
                            "({}·{})·{} != {}·({}{})",
                            self.points[x],
                            g.arrow_name(a),
                            g.arrow_name(b),
                            self.points[x],
                            g.arrow_name(a),
                            g.arrow_name(b)
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn groupoid(&self) -> &FiniteGroupoid {
        &self.groupoid
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn momentum(&self, x: usize) -> UnitId {
        self.momentum[x]
    }

    pub fn act(&self, x: usize, a: ArrowId) -> Option<usize> {
        self.table.get(&(x, a)).copied()
    }

    /// `m^{-1}(u)` in point order.
    pub fn fibre(&self, u: UnitId) -> Vec<usize> {
        (0..self.points.len())
            .filter(|&x| self.momentum[x] == u)
            .collect()
    }

    /// `St(x) = {γ : x·γ = x}` by direct scan of all arrows.
    pub fn stabilizer(&self, x: usize) -> Vec<ArrowId> {
        self.groupoid
            .arrows()
            .filter(|&a| self.act(x, a) == Some(x))
            .collect()
    }

    /// The action `α_γ(f)(x) = f(x·γ)` on `C(m^{-1}(u))`, realised by
    /// diagonal algebras and permutation unitaries with `U_γ |x·γ⟩ = |x⟩`.
    pub fn action(&self) -> Result<GroupoidAction, ModelError> {
        let g = &*self.groupoid;
        let fibres: Vec<Vec<usize>> = g.units().map(|u| self.fibre(u)).collect();
        let pos = |x: usize| {
            fibres[self.momentum[x]]
                .iter()
                .position(|&p| p == x)
                .unwrap()
        };
        let algebras = fibres
            .iter()
            .map(|f| MatrixAlgebra::diagonal(f.len()))
            .collect();
        let unitaries = g
            .arrows()
            .map(|a| {
                let (r, s) = (g.tgt(a), g.src(a));
                let mut u = CMat::zeros(fibres[r].len(), fibres[s].len());
                for &x in &fibres[r] {
                    u[(pos(x), pos(self.act(x, a).unwrap()))] = real(1.0);
                }
                u
            })
            .collect();
        Ok(GroupoidAction::new(
            self.groupoid.clone(),
            algebras,
            unitaries,
        )?)
    }
}

/// `X ⋊ G` with its arrows `(x, γ)`.
#[derive(Clone, Debug)]
pub struct TransformationGroupoid {
    pub groupoid: Arc<FiniteGroupoid>,
    pub pairs: Vec<(usize, ArrowId)>,
    index: BTreeMap<(usize, ArrowId), ArrowId>,
}

impl TransformationGroupoid {
    pub fn arrow(&self, x: usize, a: ArrowId) -> Option<ArrowId> {
        self.index.get(&(x, a)).copied()
    }
}

/// Arrows `(x, γ)` with `s = x·γ`, `r = x` and `(x, γ)(x·γ, η) = (x, γη)`.
pub fn transformation_groupoid(gs: &GSpace) -> TransformationGroupoid {
    let g = gs.groupoid();
    let mut pairs = Vec::new();
    for x in 0..gs.points.len() {
        for a in g.range_fiber(gs.momentum[x]) {
            pairs.push((x, a));
        }
    }
    let index: BTreeMap<(usize, ArrowId), ArrowId> =
        pairs.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let arrows = pairs
        .iter()
        .map(|&(x, a)| Arrow {
            id: format!("({},{})", gs.points[x], g.arrow_name(a)),
            src: gs.act(x, a).unwrap(),
            tgt: x,
        })
        .collect();
    let inv = pairs
        .iter()
        .map(|&(x, a)| index[&(gs.act(x, a).unwrap(), g.inv(a))])
        .collect();
    let unit_arrow = (0..gs.points.len())
        .map(|x| index[&(x, g.unit_arrow(gs.momentum[x]))])
        .collect();
    let groupoid = FiniteGroupoid::from_indexed(
        gs.points.clone(),
        arrows,
        |i, j| {
            let ((x, a), (y, b)) = (pairs[i], pairs[j]);
            if gs.act(x, a) != Some(y) {
                return None;
            }
            g.compose(a, b).map(|ab| index[&(x, ab)])
        },
        inv,
        unit_arrow,
    )
    .expect("a valid G-space yields a groupoid");
    TransformationGroupoid {
        groupoid: Arc::new(groupoid),
        pairs,
        index,
    }
}

/// The two algebra models of a G-space: `C*(G; r^*A)` with
/// `A(u) = C(m^{-1}(u))`, and `C*(X ⋊ G)` with line fibres.
#[derive(Clone, Debug)]
pub struct GSpaceModels {
    pub space: GSpace,
    pub action: GroupoidAction,
    pub over_g: AlgebraModel,
    pub transformation: TransformationGroupoid,
    pub crossed: AlgebraModel,
}

impl GSpaceModels {
    pub fn new(space: GSpace, tol: f64) -> Result<Self, ModelError> {
        let action = space.action()?;
        let over_g = AlgebraModel::new(Arc::new(pullback_bundle(&action)?), tol)?;
        let transformation = transformation_groupoid(&space);
        let crossed = AlgebraModel::new(
            Arc::new(trivial_bundle(
                transformation.groupoid.clone(),
                &MatrixAlgebra::scalars(),
            )),
            tol,
        )?;
        Ok(Self {
            space,
            action,
            over_g,
            transformation,
            crossed,
        })
    }

    /// `δ_{(x,γ)} ↦ e_x U_γ`: transports a state on `C*(X ⋊ G)` to
    /// `C*(G; r^*A)`.
    pub fn to_g_model(&self, phi: &State) -> State {
        let g = self.space.groupoid();
        let values: Vec<C64> = self
            .over_g
            .basis()
            .iter()
            .map(|&(a, i)| {
                let x = self.space.fibre(g.tgt(a))[i];
                let t = self.transformation.arrow(x, a).unwrap();
                phi.eval_at(t, &CMat::from_element(1, 1, real(1.0)))
            })
            .collect();
        State::from_basis_values(&self.over_g, &values)
    }
}

/// `(μ, {ν_u}, {τ_{u,x}})` with `τ_{u,x}(δ_η)` stored for `η ∈ St(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GSpaceKmsTriple {
    pub mu: UnitMeasure,
    /// `ν_u(x)` per point of the support fibres.
    pub nu: BTreeMap<usize, f64>,
    pub tau: BTreeMap<usize, BTreeMap<ArrowId, [f64; 2]>>,
    /// Quasi-invariance of `μ` with `e^{-βc}` when `c(x, γ)` depends on `γ`
    /// alone; otherwise `None`.
    pub mu_condition_i: Option<Check>,
    /// Quasi-invariance on `X ⋊ G` of `λ(x) = μ(m(x)) ν_{m(x)}(x)`.
    pub joint_condition_i: Check,
    pub certificate: KmsCertificate,
}

impl GSpaceKmsTriple {
    /// `Σ_u μ(u) Σ_{x ∈ m^{-1}(u)} ν_u(x) Σ_{η ∈ St(x)} f(η)(x) τ_{u,x}(δ_η)`
    /// for `f` in `C*(G; r^*A)`.
    pub fn evaluate(&self, models: &GSpaceModels, f: &Section) -> C64 {
        let gs = &models.space;
        let mut total = C64::new(0.0, 0.0);
        for (&x, &nu) in &self.nu {
            let u = gs.momentum(x);
            let p = gs.fibre(u).iter().position(|&q| q == x).unwrap();
            for (&eta, t) in &self.tau[&x] {
                if let Some(v) = f.get(eta) {
                    // f(η) = diag(h) U_η, and h(x) = (f(η) U_η^*)_{xx}
                    let h = (v * models.action.unitary(eta).adjoint())[(p, p)];
                    total += h * C64::new(t[0], t[1]) * self.mu.at(u) * nu;
                }
            }
        }
        total
    }
}

/// Disintegrates a KMS state on `C*(X ⋊ G)` twice: over `G` (giving `μ`
/// and states `φ_u` on `C(m^{-1}(u)) ⋊ G^u_u`), then each `φ_u` over the
/// transformation group `m^{-1}(u) ⋊ G^u_u` (giving `ν_u` and `τ_{u,x}`).
pub fn gspace_double_disintegrate(
    models: &GSpaceModels,
    phi: &State,
    c: &Cocycle,
    beta: f64,
    tol: f64,
) -> Result<GSpaceKmsTriple, ModelError> {
    let gs = &models.space;
    let g = gs.groupoid();
    let tg = &models.transformation;
    let certificate = is_kms(&models.crossed, phi, &Dynamics::new(c.clone()), beta, tol);
    if !certificate.pass {
        return Err(KmsError::rejected(&certificate).into());
    }
    let first = disintegrate(&models.over_g, &models.to_g_model(phi), tol)?;

    let mut nu = BTreeMap::new();
    let mut tau = BTreeMap::new();
    for u in first.mu.support(tol) {
        let iso = models.over_g.isotropy(u);
        let phi_u = first.field.get(u).unwrap();
        let fibre = gs.fibre(u);
        // m^{-1}(u) ⋊ G^u_u over the local isotropy group
        let local_g = iso.model.bundle().groupoid_arc();
        let mut table = BTreeMap::new();
        for (p, &x) in fibre.iter().enumerate() {
            for (l, &a) in iso.parent.iter().enumerate() {
                let y = gs.act(x, a).unwrap();
                table.insert((p, l), fibre.iter().position(|&q| q == y).unwrap());
            }
        }
        let names = fibre.iter().map(|&x| gs.points[x].clone()).collect();
        let local = GSpace::new(local_g, names, vec![0; fibre.len()], table)?;
        let lt = transformation_groupoid(&local);
        let lmodel = AlgebraModel::new(
            Arc::new(trivial_bundle(
                lt.groupoid.clone(),
                &MatrixAlgebra::scalars(),
            )),
            tol,
        )?;
        let values: Vec<C64> = lt
            .pairs
            .iter()
            .map(|&(p, l)| {
                let d = fibre.len();
                phi_u.eval_at(
                    l,
                    &(matrix_unit(d, d, p, p) * models.action.unitary(iso.parent[l])),
                )
            })
            .collect();
        let psi = State::from_basis_values(&lmodel, &values);
        let second = disintegrate(&lmodel, &psi, tol)?;
        for (p, &x) in fibre.iter().enumerate() {
            let w = second.mu.at(p);
            if w <= tol {
                continue;
            }
            nu.insert(x, w);
            let tau_x = second.field.get(p).unwrap();
            let liso = lmodel.isotropy(p);
            let mut vals = BTreeMap::new();
            for (k, &t) in liso.parent.iter().enumerate() {
                let (_, l) = lt.pairs[t];
                let v = tau_x.eval_at(k, &CMat::from_element(1, 1, real(1.0)));
                vals.insert(iso.parent[l], [v.re, v.im]);
            }
            tau.insert(x, vals);
        }
    }

    // c descends to G when c(x, γ) is independent of x
    let mut descends = vec![None::<f64>; g.num_arrows()];
    let mut consistent = true;
    for (i, &(_, a)) in tg.pairs.iter().enumerate() {
        match descends[a] {
            None => descends[a] = Some(c.at(i)),
            Some(v) => consistent &= approx_eq(v, c.at(i), tol),
        }
    }
    let mu_condition_i = consistent.then(|| {
        let cg = Cocycle::from_fn(g, |a| descends[a].unwrap_or(0.0));
        check_condition_i(g, &first.mu, &cg, beta, tol)
    });
    let joint = UnitMeasure::new(
        &tg.groupoid,
        (0..gs.points.len())
            .map(|x| first.mu.at(gs.momentum(x)) * nu.get(&x).copied().unwrap_or(0.0))
            .collect(),
    )?;
    let joint_condition_i = check_condition_i(&tg.groupoid, &joint, c, beta, tol);
    Ok(GSpaceKmsTriple {
        mu: first.mu,
        nu,
        tau,
        mu_condition_i,
        joint_condition_i,
        certificate,
    })
}

/// Max over the basis of `C*(G; r^*A)` of `|φ(f) − triple(f)|`.
pub fn reconstruction_residual(
    models: &GSpaceModels,
    phi: &State,
    triple: &GSpaceKmsTriple,
) -> f64 {
    let phi_g = models.to_g_model(phi);
    (0..models.over_g.dim())
        .map(|k| {
            let f = models.over_g.basis_section(k);
            (phi_g.eval(&f) - triple.evaluate(models, &f)).norm()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupoid::{cyclic_group, group_bundle};
    use crate::linalg::{approx_eq_c, identity};

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn pair_model_dimensions() {
        let pm = build_pair_model(2, &names(&["*"]), &MatrixAlgebra::scalars(), 1e-9).unwrap();
        assert_eq!(pm.model.dim(), 4);
        assert_eq!(pm.to_matrices(pm.model.unit())[0], identity(2));
        let pm =
            build_pair_model(1, &names(&["a", "b", "c"]), &MatrixAlgebra::scalars(), 1e-9).unwrap();
        assert_eq!(pm.model.dim(), 3);
        let pm = build_pair_model(2, &names(&["a", "b"]), &MatrixAlgebra::full(2), 1e-9).unwrap();
        assert_eq!(pm.model.dim(), 32);
        assert!(pm.groupoid().is_principal());
        assert_eq!(pm.groupoid().orbits().len(), 2);
        for a in pm.groupoid().arrows() {
            let (h, x, k) = pm.triple(a);
            assert_eq!(pm.arrow(h, x, k), a);
        }
        assert_eq!(
            build_pair_model(0, &names(&["*"]), &MatrixAlgebra::scalars(), 1e-9).unwrap_err(),
            ModelError::EmptyModel
        );
    }

    #[test]
    fn gibbs_measure_from_mu1() {
        let pm = build_pair_model(2, &names(&["*"]), &MatrixAlgebra::scalars(), 1e-9).unwrap();
        let c = h_minus_k(&pm);
        let beta = 2f64.ln();
        let nu = measure_from_mu1(&pm, &[1.0], &c, beta).unwrap();
        assert!(approx_eq(nu.at(0), 2.0 / 3.0, 1e-12) && approx_eq(nu.at(1), 1.0 / 3.0, 1e-12));
        let mu1 = mu1_from_measure(&pm, &nu, &c, beta, 1e-9).unwrap();
        let back = measure_from_mu1(&pm, &mu1, &c, beta).unwrap();
        assert!(back.max_deviation(&nu) < 1e-15);
        let uniform = UnitMeasure::new(pm.groupoid(), vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            mu1_from_measure(&pm, &uniform, &c, beta, 1e-9),
            Err(ModelError::NotQuasiInvariant { .. })
        ));
        assert_eq!(
            measure_from_mu1(&pm, &[0.0], &c, beta).unwrap_err(),
            ModelError::ZeroMeasure
        );
    }

    #[test]
    fn matrix_model_kms() {
        let pm = build_pair_model(2, &names(&["a", "b"]), &MatrixAlgebra::full(2), 1e-9).unwrap();
        let c = h_minus_k(&pm);
        let tr = vec![identity(2) * real(0.5); 4];
        let (phi, cert) = kms_states_matrix_model(&pm, &[0.3, 0.7], &tr, &c, 1.0, 1e-9).unwrap();
        assert!(cert.pass);
        assert!(phi.certify(&pm.model, 1e-9).is_state());
        let mut vector = tr.clone();
        vector[pm.unit(1, 0)] = matrix_unit(2, 2, 0, 0);
        assert!(matches!(
            kms_states_matrix_model(&pm, &[0.3, 0.7], &vector, &c, 1.0, 1e-9),
            Err(ModelError::ConditionFails { .. })
        ));
    }

    fn swap_space() -> GSpace {
        let g = Arc::new(cyclic_group(2));
        let table = BTreeMap::from([((0, 0), 0), ((1, 0), 1), ((0, 1), 1), ((1, 1), 0)]);
        GSpace::new(g, names(&["p", "q"]), vec![0, 0], table).unwrap()
    }

    #[test]
    fn swap_transformation_groupoid_is_p2() {
        let gs = swap_space();
        let t = transformation_groupoid(&gs);
        assert!(crate::groupoid::validate_groupoid(&t.groupoid).is_empty());
        assert!(t.groupoid.is_principal());
        assert_eq!(t.groupoid.num_arrows(), 4);
        assert_eq!(t.groupoid.orbits().len(), 1);
        for x in 0..2 {
            assert_eq!(gs.stabilizer(x), vec![0]);
        }
        assert!(gs.action().unwrap().validate(1e-9).is_empty());
    }

    #[test]
    fn invalid_action_rejected() {
        let g = Arc::new(cyclic_group(2));
        let table = BTreeMap::from([((0, 0), 0), ((1, 0), 1), ((0, 1), 1), ((1, 1), 1)]);
        assert!(matches!(
            GSpace::new(g, names(&["p", "q"]), vec![0, 0], table),
            Err(ModelError::InvalidAction(_))
        ));
    }

    #[test]
    fn swap_gibbs_double_disintegration() {
        let models = GSpaceModels::new(swap_space(), 1e-9).unwrap();
        let tg = &models.transformation;
        // c(x, γ) = pos(x) − pos(x·γ), a coboundary on X ⋊ G ≅ P(2)
        let c = Cocycle::from_fn(&tg.groupoid, |i| {
            let (x, a) = tg.pairs[i];
            x as f64 - models.space.act(x, a).unwrap() as f64
        });
        let beta = 2f64.ln();
        let phi = State::unit_trace(&models.crossed, &[2.0 / 3.0, 1.0 / 3.0]);
        let triple = gspace_double_disintegrate(&models, &phi, &c, beta, 1e-9).unwrap();
        assert!(approx_eq(triple.nu[&0], 2.0 / 3.0, 1e-12));
        assert!(triple.mu_condition_i.is_none());
        assert!(triple.joint_condition_i.holds);
        assert!(reconstruction_residual(&models, &phi, &triple) < 1e-12);
    }

    #[test]
    fn trivial_action_recovers_group_state() {
        let g = Arc::new(cyclic_group(2));
        let table = BTreeMap::from([((0, 0), 0), ((0, 1), 0)]);
        let gs = GSpace::new(g.clone(), names(&["p"]), vec![0], table).unwrap();
        assert_eq!(gs.stabilizer(0), vec![0, 1]);
        let models = GSpaceModels::new(gs, 1e-9).unwrap();
        // the character χ(g) = -1 written as a density on C*(Z/2)
        let tg = &models.transformation;
        let dens = [
            (tg.arrow(0, 0).unwrap(), 1.0),
            (tg.arrow(0, 1).unwrap(), -1.0),
        ]
        .map(|(a, v)| (a, CMat::from_element(1, 1, real(v))));
        let phi = State::from_densities(&models.crossed, dens);
        let c = Cocycle::zero(&tg.groupoid);
        let triple = gspace_double_disintegrate(&models, &phi, &c, 0.7, 1e-9).unwrap();
        let t = &triple.tau[&0];
        assert!(approx_eq_c(C64::new(t[&1][0], t[&1][1]), real(-1.0), 1e-12));
        assert!(triple.mu_condition_i.as_ref().unwrap().holds);
        assert!(reconstruction_residual(&models, &phi, &triple) < 1e-12);
    }

    #[test]
    fn free_action_has_trivial_stabilizers() {
        let g = Arc::new(group_bundle(&[3], &names(&["*"])));
        let table: BTreeMap<_, _> = (0..3)
            .flat_map(|x| (0..3).map(move |a| ((x, a), (x + a) % 3)))
            .collect();
        let gs = GSpace::new(g, names(&["a", "b", "c"]), vec![0; 3], table).unwrap();
        let models = GSpaceModels::new(gs, 1e-9).unwrap();
        assert!(models.transformation.groupoid.is_principal());
        let c = Cocycle::zero(&models.transformation.groupoid);
        let phi = State::unit_trace(&models.crossed, &[1.0 / 3.0; 3]);
        let triple = gspace_double_disintegrate(&models, &phi, &c, 1.0, 1e-9).unwrap();
        assert!(triple.tau.values().all(|t| t.len() == 1));
        assert!(reconstruction_residual(&models, &phi, &triple) < 1e-12);
    }
}
