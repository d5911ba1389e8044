//! Saturated Fell bundles with finite-dimensional fibres, realized inside an
//! ambient matrix model: the fibre over `γ` is a subspace of
//! `d_{r(γ)} × d_{s(γ)}` complex matrices, bundle multiplication is the
//! matrix product and the involution is the conjugate transpose.

use std::sync::Arc;

use thiserror::Error;

use crate::groupoid::{ArrowId, FiniteGroupoid, UnitId};
use crate::linalg::{
    algebra_unit, frobenius, identity, matrix_unit, min_hermitian_eigenvalue, op_norm,
    orthonormalize, rank, span_residual, CMat,
};
use crate::report::{Axiom, ValidationReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BundleError {
    #[error("bundle has {got} fibres for {expected} arrows")]
    FiberCount { expected: usize, got: usize },
    #[error("fibre over `{arrow}` has shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        arrow: String,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("basis element {index} over `{arrow}` has shape {got:?}, fibre declares {expected:?}")]
    BasisShape {
        arrow: String,
        index: usize,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("`{0}` is not a subgroupoid of the bundle's groupoid")]
    NotSubgroupoid(String),
    #[error("unknown unit #{0}")]
    UnknownUnit(UnitId),
    #[error("matrix algebra basis is not closed under product, adjoint, or lacks a unit")]
    NotAlgebra,
    #[error("action data has {got} entries, expected {expected}")]
    ActionLength { expected: usize, got: usize },
}

/// A *-subalgebra of `M_d(C)` given by a spanning basis.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixAlgebra {
    d: usize,
    basis: Vec<CMat>,
}

impl MatrixAlgebra {
    /// Checks closure under product and adjoint and the existence of a unit.
    pub fn from_basis(d: usize, basis: Vec<CMat>, tol: f64) -> Result<Self, BundleError> {
        if basis.is_empty() || basis.iter().any(|b| b.shape() != (d, d)) {
            return Err(BundleError::NotAlgebra);
        }
        let onb = orthonormalize(&basis, tol);
        let closed = basis.iter().all(|a| {
            span_residual(&onb, &a.adjoint()) <= tol.sqrt() * frobenius(a).max(1.0)
                && basis.iter().all(|b| {
                    span_residual(&onb, &(a * b))
                        <= tol.sqrt() * (frobenius(a) * frobenius(b)).max(1.0)
                })
        });
        if !closed || algebra_unit(&basis, tol).is_none() {
            return Err(BundleError::NotAlgebra);
        }
        Ok(Self { d, basis })
    }

    /// `M_d(C)` with matrix-unit basis.
    pub fn full(d: usize) -> Self {
        let basis = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| matrix_unit(d, d, i, j))
            .collect();
        Self { d, basis }
    }

    /// `C` as `M_1(C)`.
    pub fn scalars() -> Self {
        Self::full(1)
    }

    /// Diagonal matrices, i.e. `C^d`.
    pub fn diagonal(d: usize) -> Self {
        let basis = (0..d).map(|i| matrix_unit(d, d, i, i)).collect();
        Self { d, basis }
    }

    /// Block-diagonal `M_{n_1} ⊕ ... ⊕ M_{n_k}`.
    pub fn blocks(sizes: &[usize]) -> Self {
        let d = sizes.iter().sum();
        let mut basis = Vec::new();
        let mut off = 0;
        for &n in sizes {
            for i in 0..n {
                for j in 0..n {
                    basis.push(matrix_unit(d, d, off + i, off + j));
                }
            }
            off += n;
        }
        Self { d, basis }
    }

    /// Conjugate by a unitary: `u A u^*`.
    pub fn conjugate(&self, u: &CMat) -> Self {
        Self {
            d: self.d,
            basis: self.basis.iter().map(|b| u * b * u.adjoint()).collect(),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[CMat] {
        &self.basis
    }
}

/// The fibre `A_γ`: a subspace of `rows × cols` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Fiber {
    rows: usize,
    cols: usize,
    basis: Vec<CMat>,
    onb: Vec<CMat>,
}

impl Fiber {
    pub fn new(rows: usize, cols: usize, basis: Vec<CMat>) -> Self {
        let onb = orthonormalize(&basis, 1e-10);
        Self {
            rows,
            cols,
            basis,
            onb,
        }
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, Vec::new())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Declared basis, as given.
    pub fn basis(&self) -> &[CMat] {
        &self.basis
    }

    /// Hilbert–Schmidt orthonormal basis of the span.
    pub fn onb(&self) -> &[CMat] {
        &self.onb
    }

    /// Dimension of the span.
    pub fn dim(&self) -> usize {
        self.onb.len()
    }

    pub fn contains(&self, m: &CMat, tol: f64) -> bool {
        m.shape() == self.shape() && span_residual(&self.onb, m) <= tol * frobenius(m).max(1.0)
    }

    /// Orthogonal projection onto the fibre.
    pub fn project(&self, m: &CMat) -> CMat {
        let mut out = CMat::zeros(self.rows, self.cols);
        for e in &self.onb {
            out += e * crate::linalg::hs_inner(e, m);
        }
        out
    }

    /// Coordinates of `m` in the declared basis (least squares).
    pub fn coords(&self, m: &CMat) -> Vec<crate::linalg::C64> {
        let k = self.basis.len();
        if k == 0 {
            return Vec::new();
        }
        let mut gram = CMat::zeros(k, k);
        let mut rhs = crate::linalg::CVec::zeros(k);
        for i in 0..k {
            for j in 0..k {
                gram[(i, j)] = crate::linalg::hs_inner(&self.basis[i], &self.basis[j]);
            }
            rhs[i] = crate::linalg::hs_inner(&self.basis[i], m);
        }
        (crate::linalg::pinv(&gram, 1e-13) * rhs)
            .iter()
            .cloned()
            .collect()
    }

    /// Element with the given coordinates in the declared basis.
    pub fn element(&self, coords: &[crate::linalg::C64]) -> CMat {
        crate::linalg::combine(&self.basis, coords, self.rows, self.cols)
    }
}

/// Fibre norm: the largest singular value in the ambient model.
pub fn fiber_norm(a: &CMat) -> f64 {
    op_norm(a)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FellBundle {
    groupoid: Arc<FiniteGroupoid>,
    fibers: Vec<Fiber>,
    unit_dims: Vec<usize>,
}

impl FellBundle {
    /// Unit dimensions are read from the unit-arrow fibres; every other fibre
    /// must have shape `d_{r(γ)} × d_{s(γ)}`.
    pub fn new(groupoid: Arc<FiniteGroupoid>, fibers: Vec<Fiber>) -> Result<Self, BundleError> {
        if fibers.len() != groupoid.num_arrows() {
            return Err(BundleError::FiberCount {
                expected: groupoid.num_arrows(),
                got: fibers.len(),
            });
        }
        let unit_dims: Vec<usize> = groupoid
            .units()
            .map(|x| fibers[groupoid.unit_arrow(x)].rows)
            .collect();
        for a in groupoid.arrows() {
            let f = &fibers[a];
            let expected = (unit_dims[groupoid.tgt(a)], unit_dims[groupoid.src(a)]);
            if f.shape() != expected {
                return Err(BundleError::ShapeMismatch {
                    arrow: groupoid.arrow_name(a).to_string(),
                    expected,
                    got: f.shape(),
                });
            }
            for (i, b) in f.basis.iter().enumerate() {
                if b.shape() != expected {
                    return Err(BundleError::BasisShape {
                        arrow: groupoid.arrow_name(a).to_string(),
                        index: i,
                        expected,
                        got: b.shape(),
                    });
                }
            }
        }
        Ok(Self {
            groupoid,
            fibers,
            unit_dims,
        })
    }

    pub fn groupoid(&self) -> &FiniteGroupoid {
        &self.groupoid
    }

    pub fn groupoid_arc(&self) -> Arc<FiniteGroupoid> {
        self.groupoid.clone()
    }

    pub fn fiber(&self, a: ArrowId) -> &Fiber {
        &self.fibers[a]
    }

    pub fn fibers(&self) -> &[Fiber] {
        &self.fibers
    }

    /// Ambient dimension `d_x` at a unit.
    pub fn unit_dim(&self, x: UnitId) -> usize {
        self.unit_dims[x]
    }

    pub fn shape(&self, a: ArrowId) -> (usize, usize) {
        self.fibers[a].shape()
    }

    /// Total dimension `Σ_γ dim A_γ` of the section algebra.
    pub fn total_dim(&self) -> usize {
        self.fibers.iter().map(Fiber::dim).sum()
    }

    /// Unit `1_{A_x}` of the unit fibre (a projection in `M_{d_x}`).
    pub fn unit_fiber_unit(&self, x: UnitId, tol: f64) -> Option<CMat> {
        let f = &self.fibers[self.groupoid.unit_arrow(x)];
        algebra_unit(f.onb(), tol)
    }
}

fn witness(g: &FiniteGroupoid, parts: &[(ArrowId, usize)]) -> Vec<String> {
    parts
        .iter()
        .map(|&(a, i)| format!("{}#{}", g.arrow_name(a), i))
        .collect()
}

/// Every violated Fell-bundle axiom and saturation failure, with witness
/// basis elements written `arrow#index`.
pub fn validate_bundle(b: &FellBundle, tol: f64) -> ValidationReport {
    let g = b.groupoid();
    let mut rep = ValidationReport::default();
    let loose = tol.sqrt();

    for a in g.arrows() {
        let f = b.fiber(a);
        if f.basis().len() != f.dim() {
            rep.push(
                Axiom::BasisIndependence,
                vec![g.arrow_name(a).to_string()],
                format!(
                    "{} basis elements span dimension {}",
                    f.basis().len(),
                    f.dim()
                ),
            );
        }
    }

    for x in g.units() {
        let e = g.unit_arrow(x);
        let f = b.fiber(e);
        if f.dim() == 0 || algebra_unit(f.onb(), tol).is_none() {
            rep.push(
                Axiom::UnitFiberAlgebra,
                vec![g.arrow_name(e).to_string()],
                "unit fibre is not a unital algebra",
            );
        }
    }

    // (1)-(4): products land in the fibre over the product arrow
    for a in g.arrows() {
        for c in g.arrows() {
            let Some(ac) = g.compose(a, c) else { continue };
            let target = b.fiber(ac);
            'pair: for (i, x) in b.fiber(a).basis().iter().enumerate() {
                for (j, y) in b.fiber(c).basis().iter().enumerate() {
                    let p = x * y;
                    if span_residual(target.onb(), &p)
                        > loose * (frobenius(x) * frobenius(y)).max(1e-300)
                    {
                        rep.push(
                            Axiom::Multiplication,
                            witness(g, &[(a, i), (c, j)]),
                            format!("product not contained in fibre over {}", g.arrow_name(ac)),
                        );
                        break 'pair;
                    }
                }
            }
        }
    }

    // (5)-(8): A_γ^* = A_{γ^{-1}}
    for a in g.arrows() {
        let ai = g.inv(a);
        let (fa, fi) = (b.fiber(a), b.fiber(ai));
        let bad = fa
            .basis()
            .iter()
            .position(|x| span_residual(fi.onb(), &x.adjoint()) > loose * frobenius(x).max(1e-300));
        if let Some(i) = bad {
            rep.push(
                Axiom::Involution,
                witness(g, &[(a, i)]),
                format!("adjoint not in fibre over {}", g.arrow_name(ai)),
            );
        } else if fa.dim() != fi.dim() {
            rep.push(
                Axiom::Involution,
                vec![g.arrow_name(a).to_string(), g.arrow_name(ai).to_string()],
                "dim A_γ != dim A_{γ^-1}",
            );
        }
    }

    // (9), (10) on basis elements and their sums
    for a in g.arrows() {
        let f = b.fiber(a);
        let mut samples: Vec<(usize, CMat)> = f.basis().iter().cloned().enumerate().collect();
        if f.basis().len() > 1 {
            let sum = f
                .basis()
                .iter()
                .skip(1)
                .fold(f.basis()[0].clone(), |acc, m| acc + m);
            samples.push((f.basis().len(), sum));
        }
        for (i, x) in samples {
            let xx = x.adjoint() * &x;
            let n = fiber_norm(&x);
            if (fiber_norm(&xx) - n * n).abs() > loose * (n * n).max(1.0) {
                rep.push(Axiom::CStarIdentity, witness(g, &[(a, i)]), "‖a*a‖ != ‖a‖²");
            }
            if min_hermitian_eigenvalue(&xx) < -loose * (n * n).max(1.0) {
                rep.push(
                    Axiom::Positivity,
                    witness(g, &[(a, i)]),
                    "a*a has a negative eigenvalue",
                );
            }
        }
    }

    // saturation: span(A_γ A_η) = A_{γη}
    for a in g.arrows() {
        for c in g.arrows() {
            let Some(ac) = g.compose(a, c) else { continue };
            let target_dim = b.fiber(ac).dim();
            let products: Vec<CMat> = b
                .fiber(a)
                .onb()
                .iter()
                .flat_map(|x| b.fiber(c).onb().iter().map(move |y| x * y))
                .collect();
            let span = orthonormalize(&products, loose);
            if span.len() != target_dim {
                rep.push(
                    Axiom::Saturation,
                    vec![g.arrow_name(a).into(), g.arrow_name(c).into()],
                    format!(
                        "span of products has dim {} but fibre has dim {}",
                        span.len(),
                        target_dim
                    ),
                );
            }
        }
    }
    rep
}

/// Trivial bundle `G × A` in which every fibre is a copy of `A`.
pub fn trivial_bundle(g: Arc<FiniteGroupoid>, algebra: &MatrixAlgebra) -> FellBundle {
    let d = algebra.ambient_dim();
    let fibers = g
        .arrows()
        .map(|_| Fiber::new(d, d, algebra.basis().to_vec()))
        .collect();
    FellBundle::new(g, fibers).expect("constant shapes")
}

/// A groupoid dynamical system `α_γ = Ad(U_γ): A(s(γ)) → A(r(γ))` given by
/// unitaries `U_γ ∈ M_{d_{r(γ)} × d_{s(γ)}}` (block permutations included).
#[derive(Clone, Debug, PartialEq)]
pub struct GroupoidAction {
    groupoid: Arc<FiniteGroupoid>,
    algebras: Vec<MatrixAlgebra>,
    unitaries: Vec<CMat>,
}

impl GroupoidAction {
    pub fn new(
        groupoid: Arc<FiniteGroupoid>,
        algebras: Vec<MatrixAlgebra>,
        unitaries: Vec<CMat>,
    ) -> Result<Self, BundleError> {
        if algebras.len() != groupoid.num_units() {
            return Err(BundleError::ActionLength {
                expected: groupoid.num_units(),
                got: algebras.len(),
            });
        }
        if unitaries.len() != groupoid.num_arrows() {
            return Err(BundleError::ActionLength {
                expected: groupoid.num_arrows(),
                got: unitaries.len(),
            });
        }
        for a in groupoid.arrows() {
            let expected = (
                algebras[groupoid.tgt(a)].ambient_dim(),
                algebras[groupoid.src(a)].ambient_dim(),
            );
            if unitaries[a].shape() != expected {
                return Err(BundleError::ShapeMismatch {
                    arrow: groupoid.arrow_name(a).to_string(),
                    expected,
                    got: unitaries[a].shape(),
                });
            }
        }
        Ok(Self {
            groupoid,
            algebras,
            unitaries,
        })
    }

    /// Identity action of `A` on every unit.
    pub fn trivial(groupoid: Arc<FiniteGroupoid>, algebra: &MatrixAlgebra) -> Self {
        let d = algebra.ambient_dim();
        let algebras = groupoid.units().map(|_| algebra.clone()).collect();
        let unitaries = groupoid.arrows().map(|_| identity(d)).collect();
        Self {
            groupoid,
            algebras,
            unitaries,
        }
    }

    pub fn groupoid(&self) -> &FiniteGroupoid {
        &self.groupoid
    }

    pub fn groupoid_arc(&self) -> Arc<FiniteGroupoid> {
        self.groupoid.clone()
    }

    pub fn algebra(&self, x: UnitId) -> &MatrixAlgebra {
        &self.algebras[x]
    }

    pub fn unitary(&self, a: ArrowId) -> &CMat {
        &self.unitaries[a]
    }

    /// `α_γ(a) = U_γ a U_γ^*`.
    pub fn alpha(&self, a: ArrowId, m: &CMat) -> CMat {
        &self.unitaries[a] * m * self.unitaries[a].adjoint()
    }

    pub fn validate(&self, tol: f64) -> ValidationReport {
        let g = &*self.groupoid;
        let mut rep = ValidationReport::default();
        let loose = tol.sqrt();
        for a in g.arrows() {
            let u = &self.unitaries[a];
            let dr = u.nrows();
            let ds = u.ncols();
            if frobenius(&(u.adjoint() * u - identity(ds))) > loose
                || frobenius(&(u * u.adjoint() - identity(dr))) > loose
            {
                rep.push(
                    Axiom::ActionUnitary,
                    vec![g.arrow_name(a).into()],
                    "U_γ is not unitary",
                );
            }
            let target = orthonormalize(self.algebras[g.tgt(a)].basis(), tol);
            let src = self.algebras[g.src(a)].basis();
            if src.len() != self.algebras[g.tgt(a)].dim()
                || src
                    .iter()
                    .any(|m| span_residual(&target, &self.alpha(a, m)) > loose * frobenius(m))
            {
                rep.push(
                    Axiom::ActionCovariance,
                    vec![g.arrow_name(a).into()],
                    "U_γ A(s) U_γ^* != A(r)",
                );
            }
        }
        for x in g.units() {
            let e = g.unit_arrow(x);
            let d = self.algebras[x].ambient_dim();
            if frobenius(&(&self.unitaries[e] - identity(d))) > loose {
                rep.push(
                    Axiom::ActionUnit,
                    vec![g.arrow_name(e).into()],
                    "α at a unit is not the identity",
                );
            }
        }
        for a in g.arrows() {
            for c in g.arrows() {
                if let Some(ac) = g.compose(a, c) {
                    let prod = &self.unitaries[a] * &self.unitaries[c];
                    if frobenius(&(prod - &self.unitaries[ac])) > loose {
                        rep.push(
                            Axiom::ActionCocycle,
                            vec![g.arrow_name(a).into(), g.arrow_name(c).into()],
                            "U_{γη} != U_γ U_η",
                        );
                    }
                }
            }
        }
        rep
    }
}

/// The pullback bundle `r^*A`, realized as `A_γ = A(r(γ)) U_γ`. Then
/// `(a U_γ)(b U_η) = a α_γ(b) U_{γη}` and `(a U_γ)^* = α_{γ^{-1}}(a^*) U_{γ^{-1}}`.
pub fn pullback_bundle(act: &GroupoidAction) -> Result<FellBundle, BundleError> {
    let g = act.groupoid();
    let fibers = g
        .arrows()
        .map(|a| {
            let u = act.unitary(a);
            let basis = act
                .algebra(g.tgt(a))
                .basis()
                .iter()
                .map(|m| m * u)
                .collect();
            Fiber::new(u.nrows(), u.ncols(), basis)
        })
        .collect();
    FellBundle::new(act.groupoid_arc(), fibers)
}

/// Restriction to a subgroupoid (matched by arrow id).
pub fn restrict(b: &FellBundle, sub: Arc<FiniteGroupoid>) -> Result<FellBundle, BundleError> {
    let map = b
        .groupoid()
        .embed_arrows(&sub)
        .ok_or_else(|| BundleError::NotSubgroupoid(format!("{} arrows", sub.num_arrows())))?;
    let fibers = map.iter().map(|&p| b.fiber(p).clone()).collect();
    FellBundle::new(sub, fibers)
}

/// `A|_{G_x}`: the fibres over the source fibre `G_x`, the index set of the
/// induction module at `x`.
#[derive(Clone, Debug)]
pub struct SourceFiberData {
    pub unit: UnitId,
    pub arrows: Vec<ArrowId>,
    pub fibers: Vec<Fiber>,
}

pub fn restrict_to_source_fiber(b: &FellBundle, x: UnitId) -> Result<SourceFiberData, BundleError> {
    if x >= b.groupoid().num_units() {
        return Err(BundleError::UnknownUnit(x));
    }
    let arrows = b.groupoid().source_fiber(x);
    let fibers = arrows.iter().map(|&a| b.fiber(a).clone()).collect();
    Ok(SourceFiberData {
        unit: x,
        arrows,
        fibers,
    })
}

/// Rank of `span(A_γ A_η)`; helper shared with tests.
pub fn product_span_rank(b: &FellBundle, a: ArrowId, c: ArrowId, tol: f64) -> usize {
    let products: Vec<CMat> = b
        .fiber(a)
        .onb()
        .iter()
        .flat_map(|x| b.fiber(c).onb().iter().map(move |y| x * y))
        .collect();
    if products.is_empty() {
        return 0;
    }
    let (r, k) = products[0].shape();
    let mut stacked = CMat::zeros(r * k, products.len());
    for (j, p) in products.iter().enumerate() {
        for (i, v) in p.iter().enumerate() {
            stacked[(i, j)] = *v;
        }
    }
    rank(&stacked, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupoid::{cyclic_group, isotropy, pair_groupoid, validate_groupoid};
    use crate::linalg::real;

    fn swap() -> CMat {
        CMat::from_row_slice(2, 2, &[real(0.0), real(1.0), real(1.0), real(0.0)])
    }

    #[test]
    fn trivial_line_bundle_is_valid() {
        let g = Arc::new(pair_groupoid(2));
        let b = trivial_bundle(g, &MatrixAlgebra::scalars());
        assert!(validate_bundle(&b, 1e-9).is_empty());
        assert_eq!(b.total_dim(), 4);
    }

    #[test]
    fn group_fell_bundle_with_matrix_fibers() {
        let g = Arc::new(cyclic_group(2));
        let b = trivial_bundle(g, &MatrixAlgebra::full(2));
        assert!(validate_bundle(&b, 1e-9).is_empty());
        assert_eq!(b.total_dim(), 8);
    }

    #[test]
    fn adjoint_mismatch_cites_involution() {
        // Z/2 with A_e = diagonal, A_g = span{e12}: products stay inside, adjoint does not
        let g = Arc::new(cyclic_group(2));
        let e = g.arrow_by_name("e").unwrap();
        let mut fibers = vec![Fiber::zero(2, 2), Fiber::zero(2, 2)];
        fibers[e] = Fiber::new(2, 2, MatrixAlgebra::diagonal(2).basis().to_vec());
        fibers[1 - e] = Fiber::new(2, 2, vec![matrix_unit(2, 2, 0, 1)]);
        let b = FellBundle::new(g, fibers).unwrap();
        let rep = validate_bundle(&b, 1e-9);
        assert!(rep.cites(Axiom::Involution));
        assert!(!rep.cites(Axiom::Multiplication));
    }

    #[test]
    fn zero_fiber_cites_saturation() {
        let g = Arc::new(pair_groupoid(2));
        let a12 = g.arrow_by_name("(1,*,2)").unwrap();
        let a21 = g.arrow_by_name("(2,*,1)").unwrap();
        let fibers = g
            .arrows()
            .map(|a| {
                if a == a12 || a == a21 {
                    Fiber::zero(1, 1)
                } else {
                    Fiber::new(1, 1, vec![identity(1)])
                }
            })
            .collect();
        let b = FellBundle::new(g, fibers).unwrap();
        let rep = validate_bundle(&b, 1e-9);
        assert_eq!(rep.axioms(), vec![Axiom::Saturation]);
    }

    #[test]
    fn shape_errors_on_construction() {
        let g = Arc::new(pair_groupoid(2));
        let mut fibers: Vec<Fiber> = g
            .arrows()
            .map(|_| Fiber::new(1, 1, vec![identity(1)]))
            .collect();
        fibers[1] = Fiber::new(2, 1, vec![CMat::zeros(2, 1)]);
        assert!(matches!(
            FellBundle::new(g.clone(), fibers),
            Err(BundleError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            FellBundle::new(g, vec![]),
            Err(BundleError::FiberCount { .. })
        ));
    }

    #[test]
    fn swap_action_pullback() {
        let g = Arc::new(cyclic_group(2));
        let gen = g.arrow_by_name("g").unwrap();
        let unitaries = g
            .arrows()
            .map(|a| if a == gen { swap() } else { identity(2) })
            .collect();
        let act = GroupoidAction::new(g, vec![MatrixAlgebra::diagonal(2)], unitaries).unwrap();
        assert!(act.validate(1e-9).is_empty());
        let b = pullback_bundle(&act).unwrap();
        assert!(validate_bundle(&b, 1e-9).is_empty());
        // the four fibre directions span all of M_2
        let all: Vec<CMat> = b.fibers().iter().flat_map(|f| f.basis().to_vec()).collect();
        assert_eq!(orthonormalize(&all, 1e-9).len(), 4);
    }

    #[test]
    fn trivial_action_matches_trivial_bundle() {
        let g = Arc::new(pair_groupoid(2));
        let a = MatrixAlgebra::full(2);
        let pb = pullback_bundle(&GroupoidAction::trivial(g.clone(), &a)).unwrap();
        let tb = trivial_bundle(g, &a);
        assert_eq!(pb, tb);
        assert!(validate_bundle(&pb, 1e-9).is_empty());
    }

    #[test]
    fn broken_action_cocycle_is_reported() {
        let g = Arc::new(cyclic_group(2));
        let gen = g.arrow_by_name("g").unwrap();
        let diag = CMat::from_row_slice(
            2,
            2,
            &[real(1.0), real(0.0), real(0.0), crate::linalg::c(0.0, 1.0)],
        );
        // diag(1, i) squares to diag(1,-1) != identity
        let unitaries = g
            .arrows()
            .map(|a| if a == gen { diag.clone() } else { identity(2) })
            .collect();
        let act = GroupoidAction::new(g, vec![MatrixAlgebra::full(2)], unitaries).unwrap();
        assert!(act.validate(1e-9).cites(Axiom::ActionCocycle));
    }

    #[test]
    fn restriction_examples() {
        let g = Arc::new(pair_groupoid(2));
        let b = trivial_bundle(g.clone(), &MatrixAlgebra::scalars());
        let iso = Arc::new(isotropy(&g, 0).unwrap());
        let r = restrict(&b, iso).unwrap();
        assert_eq!(r.groupoid().num_arrows(), 1);
        assert_eq!(r.fiber(0).dim(), 1);
        assert!(validate_groupoid(r.groupoid()).is_empty());

        let sf = restrict_to_source_fiber(&b, 0).unwrap();
        assert_eq!(sf.arrows.len(), 2);

        let gb = Arc::new(cyclic_group(3));
        let b3 = trivial_bundle(gb.clone(), &MatrixAlgebra::full(2));
        let r3 = restrict(&b3, Arc::new(isotropy(&gb, 0).unwrap())).unwrap();
        assert_eq!(r3.fibers(), b3.fibers());

        let other = Arc::new(cyclic_group(2));
        assert!(restrict(&b, other).is_err());
    }

    #[test]
    fn matrix_algebra_checks() {
        let d = MatrixAlgebra::diagonal(2);
        assert!(MatrixAlgebra::from_basis(2, d.basis().to_vec(), 1e-9).is_ok());
        assert!(MatrixAlgebra::from_basis(2, vec![matrix_unit(2, 2, 0, 1)], 1e-9).is_err());
        assert_eq!(MatrixAlgebra::blocks(&[2, 1]).dim(), 5);
    }

    #[test]
    fn saturation_rank_matches_dim() {
        let g = Arc::new(pair_groupoid(3));
        let b = trivial_bundle(g.clone(), &MatrixAlgebra::full(2));
        for a in g.arrows() {
            for c in g.arrows() {
                if let Some(ac) = g.compose(a, c) {
                    assert_eq!(product_span_rank(&b, a, c, 1e-9), b.fiber(ac).dim());
                }
            }
        }
    }
}
