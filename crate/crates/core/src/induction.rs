//! The induction correspondence `Y(x)` from `C^*(G; A)` to the isotropy
//! algebra `C^*(G^x_x; A(x))`, GNS representations, and induced
//! representations with the cyclic vector `a(x)`.

use std::sync::Arc;

use thiserror::Error;

use crate::conv::{AlgebraModel, IsotropyAlgebra, Section};
use crate::groupoid::{ArrowId, UnitId};
use crate::linalg::{
    frobenius, hermitian_eigen, hs_inner, min_hermitian_eigenvalue, rank, real, CMat, CVec, C64,
};
use crate::report::Check;
use crate::states::State;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InductionError {
    #[error("functional is not positive (min Gram eigenvalue {0:.3e})")]
    NotPositive(f64),
    #[error("representation is degenerate (‖L(1) - I‖ = {0:.3e})")]
    Degenerate(f64),
    #[error("representation acts on a zero space")]
    ZeroSpace,
}

/// `C_c(G_x; A|_{G_x})` with its left `C^*(G; A)`-action, right
/// `C^*(G^x_x; A(x))`-action and isotropy-valued inner product.
///
/// Elements are [`Section`]s supported on `G_x`; right coefficients are
/// sections of the isotropy bundle in local arrow numbering.
#[derive(Clone, Debug)]
pub struct InductionModule<'a> {
    model: &'a AlgebraModel,
    iso: Arc<IsotropyAlgebra>,
    unit: UnitId,
    arrows: Vec<ArrowId>,
    offsets: Vec<usize>,
}

impl<'a> InductionModule<'a> {
    pub fn new(model: &'a AlgebraModel, x: UnitId) -> Self {
        let g = model.bundle().groupoid();
        let arrows = g.source_fiber(x);
        let mut offsets = vec![0];
        for &a in &arrows {
            offsets.push(offsets.last().unwrap() + model.bundle().fiber(a).dim());
        }
        Self {
            model,
            iso: model.isotropy(x).clone(),
            unit: x,
            arrows,
            offsets,
        }
    }

    pub fn unit(&self) -> UnitId {
        self.unit
    }

    pub fn left(&self) -> &AlgebraModel {
        self.model
    }

    pub fn right(&self) -> &IsotropyAlgebra {
        &self.iso
    }

    /// The arrows of `G_x`.
    pub fn arrows(&self) -> &[ArrowId] {
        &self.arrows
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Orthonormal module basis element `p`.
    pub fn basis_element(&self, p: usize) -> Section {
        let i = self.offsets.partition_point(|&o| o <= p) - 1;
        let a = self.arrows[i];
        Section::delta(
            a,
            self.model.bundle().fiber(a).onb()[p - self.offsets[i]].clone(),
        )
    }

    /// Coordinates against the module basis (values off `G_x` are ignored).
    pub fn coords(&self, xi: &Section) -> CVec {
        let mut v = CVec::zeros(self.dim());
        for (i, &a) in self.arrows.iter().enumerate() {
            if let Some(m) = xi.get(a) {
                for (j, e) in self.model.bundle().fiber(a).onb().iter().enumerate() {
                    v[self.offsets[i] + j] = hs_inner(e, m);
                }
            }
        }
        v
    }

    /// `ξ|_{G_x}`.
    pub fn restrict(&self, f: &Section) -> Section {
        let src = self.model.bundle().groupoid();
        Section::from_values(
            f.iter()
                .filter(|(a, _)| src.src(*a) == self.unit)
                .map(|(a, m)| (a, m.clone())),
        )
    }

    /// `g *' ξ (z) = Σ_{τ ∈ G^{r(z)}} g(τ) ξ(τ^{-1} z)`.
    pub fn left_act(&self, g: &Section, xi: &Section) -> Section {
        let b = self.model.bundle();
        let gr = b.groupoid();
        let mut out = Section::zero();
        for &z in &self.arrows {
            let mut acc = CMat::zeros(b.shape(z).0, b.shape(z).1);
            for tau in gr.range_fiber(gr.tgt(z)) {
                let (Some(gv), Some(w)) = (g.get(tau), gr.compose(gr.inv(tau), z)) else {
                    continue;
                };
                if let Some(xv) = xi.get(w) {
                    acc += gv * xv;
                }
            }
            out.accumulate(z, &acc);
        }
        out.pruned(0.0)
    }

    /// `ξ *'' f (z) = Σ_{υ ∈ G^x_x} ξ(zυ) f(υ^{-1})`, with `f` in local
    /// isotropy numbering.
    pub fn right_act(&self, xi: &Section, f: &Section) -> Section {
        let b = self.model.bundle();
        let gr = b.groupoid();
        let mut out = Section::zero();
        for &z in &self.arrows {
            let mut acc = CMat::zeros(b.shape(z).0, b.shape(z).1);
            for &u in &self.iso.parent {
                let zu = gr.compose(z, u).expect("s(z) = x = r(υ)");
                let ui = self
                    .iso
                    .local(gr.inv(u))
                    .expect("isotropy is closed under inverse");
                if let (Some(xv), Some(fv)) = (xi.get(zu), f.get(ui)) {
                    acc += xv * fv;
                }
            }
            out.accumulate(z, &acc);
        }
        out.pruned(0.0)
    }

    /// `⟨ξ, ζ⟩(γ) = Σ_{t ∈ G_x} ξ(t)^* ζ(tγ)`, a section of the isotropy
    /// bundle in local numbering.
    pub fn inner(&self, xi: &Section, zeta: &Section) -> Section {
        let b = self.model.bundle();
        let gr = b.groupoid();
        let d = b.unit_dim(self.unit);
        let mut out = Section::zero();
        for (l, &gamma) in self.iso.parent.iter().enumerate() {
            let mut acc = CMat::zeros(d, d);
            for &t in &self.arrows {
                let tg = gr.compose(t, gamma).expect("s(t) = x = r(γ)");
                if let (Some(xv), Some(zv)) = (xi.get(t), zeta.get(tg)) {
                    acc += xv.adjoint() * zv;
                }
            }
            out.accumulate(l, &acc);
        }
        out.pruned(0.0)
    }

    /// `⟨g *' ξ, ζ⟩ = ⟨ξ, g^* *' ζ⟩`.
    pub fn adjointability_check(
        &self,
        g: &Section,
        xi: &Section,
        zeta: &Section,
        tol: f64,
    ) -> Check {
        let lhs = self.inner(&self.left_act(g, xi), zeta);
        let rhs = self.inner(xi, &self.left_act(&self.model.involute(g), zeta));
        let mut c = Check::pass();
        let r = lhs.distance(&rhs);
        c.record(r, r <= tol * scale_of(&[&lhs, &rhs]), || {
            vec!["adjointability".into()]
        });
        c
    }

    /// Smallest eigenvalue of `⟨ξ, ξ⟩` in the regular representation of the
    /// isotropy algebra.
    pub fn inner_min_eigenvalue(&self, xi: &Section) -> f64 {
        min_hermitian_eigenvalue(&self.iso.model.rep(&self.inner(xi, xi)))
    }

    /// Rank of the span of `⟨y_p, y_q⟩` over module basis pairs.
    pub fn fullness_rank(&self, tol: f64) -> usize {
        let n = self.dim();
        let m = &self.iso.model;
        let mut stacked = CMat::zeros(m.dim(), n * n);
        for p in 0..n {
            let yp = self.basis_element(p);
            for q in 0..n {
                let v = m.coords(&self.inner(&yp, &self.basis_element(q)));
                stacked.set_column(p * n + q, &v);
            }
        }
        rank(&stacked, tol)
    }

    /// Matrix of `ξ ↦ g *' ξ` in module coordinates.
    pub fn left_matrix(&self, g: &Section) -> CMat {
        let n = self.dim();
        let mut out = CMat::zeros(n, n);
        for p in 0..n {
            let v = self.coords(&self.left_act(g, &self.basis_element(p)));
            out.set_column(p, &v);
        }
        out
    }
}

fn scale_of(sections: &[&Section]) -> f64 {
    sections
        .iter()
        .flat_map(|s| s.iter().map(|(_, m)| frobenius(m)))
        .fold(1.0, f64::max)
}

/// Names of the bimodule identities, in order.
pub const BIMODULE_IDENTITIES: [&str; 11] = [
    "(ξ+ζ)f = ξf + ζf",
    "ξ(f+l) = ξf + ξl",
    "ξ(fl) = (ξf)l",
    "g(ξ+ζ) = gξ + gζ",
    "(g+k)ξ = gξ + kξ",
    "(gk)ξ = g(kξ)",
    "(gξ)f = g(ξf)",
    "⟨ξ,ζ+ζ'⟩ = ⟨ξ,ζ⟩ + ⟨ξ,ζ'⟩",
    "⟨ξ,ζf⟩ = ⟨ξ,ζ⟩f",
    "⟨ξ,ζ⟩* = ⟨ζ,ξ⟩",
    "⟨gξ,ζ⟩ = ⟨ξ,g*ζ⟩",
];

/// Inputs for one evaluation of the bimodule identities.
pub struct BimoduleSample<'s> {
    pub g: &'s Section,
    pub k: &'s Section,
    pub xi: &'s Section,
    pub zeta: &'s Section,
    pub zeta2: &'s Section,
    pub f: &'s Section,
    pub l: &'s Section,
}

/// Residuals of the eleven bimodule identities (relative to the size of
/// the two sides).
pub fn bimodule_residuals(y: &InductionModule<'_>, s: &BimoduleSample<'_>) -> [f64; 11] {
    let m = y.left();
    let iso = &y.right().model;
    let rel = |a: &Section, b: &Section| a.distance(b) / scale_of(&[a, b]);
    let (g, k, xi, zeta, zeta2, f, l) = (s.g, s.k, s.xi, s.zeta, s.zeta2, s.f, s.l);
    [
        rel(
            &y.right_act(&xi.add(zeta), f),
            &y.right_act(xi, f).add(&y.right_act(zeta, f)),
        ),
        rel(
            &y.right_act(xi, &f.add(l)),
            &y.right_act(xi, f).add(&y.right_act(xi, l)),
        ),
        rel(
            &y.right_act(xi, &iso.convolve(f, l)),
            &y.right_act(&y.right_act(xi, f), l),
        ),
        rel(
            &y.left_act(g, &xi.add(zeta)),
            &y.left_act(g, xi).add(&y.left_act(g, zeta)),
        ),
        rel(
            &y.left_act(&g.add(k), xi),
            &y.left_act(g, xi).add(&y.left_act(k, xi)),
        ),
        rel(
            &y.left_act(&m.convolve(g, k), xi),
            &y.left_act(g, &y.left_act(k, xi)),
        ),
        rel(
            &y.right_act(&y.left_act(g, xi), f),
            &y.left_act(g, &y.right_act(xi, f)),
        ),
        rel(
            &y.inner(xi, &zeta.add(zeta2)),
            &y.inner(xi, zeta).add(&y.inner(xi, zeta2)),
        ),
        rel(
            &y.inner(xi, &y.right_act(zeta, f)),
            &iso.convolve(&y.inner(xi, zeta), f),
        ),
        rel(&iso.involute(&y.inner(xi, zeta)), &y.inner(zeta, xi)),
        rel(
            &y.inner(&y.left_act(g, xi), zeta),
            &y.inner(xi, &y.left_act(&m.involute(g), zeta)),
        ),
    ]
}

/// A cyclic representation `(H, L, ξ)` of a finite-dimensional algebra,
/// stored as one matrix per orthonormal algebra basis element.
#[derive(Clone, Debug)]
pub struct GnsTriple {
    pub dim: usize,
    /// `L(e_k)` for the algebra's orthonormal basis.
    pub basis_reps: Vec<CMat>,
    pub cyclic: CVec,
}

impl GnsTriple {
    /// `L(f)` for a section of the algebra `model`.
    pub fn rep(&self, model: &AlgebraModel, f: &Section) -> CMat {
        let c = model.coords(f);
        let mut out = CMat::zeros(self.dim, self.dim);
        for (k, r) in self.basis_reps.iter().enumerate() {
            if c[k] != C64::new(0.0, 0.0) {
                out += r * c[k];
            }
        }
        out
    }

    /// `⟨ξ, L(f) ξ⟩`.
    pub fn vector_state(&self, model: &AlgebraModel, f: &Section) -> C64 {
        self.cyclic.dotc(&(self.rep(model, f) * &self.cyclic))
    }

    /// Dimension of `span{L(e_k) ξ}`.
    pub fn cyclic_rank(&self, tol: f64) -> usize {
        if self.dim == 0 {
            return 0;
        }
        let mut m = CMat::zeros(self.dim, self.basis_reps.len());
        for (k, r) in self.basis_reps.iter().enumerate() {
            m.set_column(k, &(r * &self.cyclic));
        }
        rank(&m, tol)
    }

    pub fn is_cyclic(&self, tol: f64) -> bool {
        self.cyclic_rank(tol) == self.dim
    }

    /// Largest deviation from `L(e_i e_j) = L(e_i)L(e_j)` and
    /// `L(e_i^*) = L(e_i)^*` over the basis.
    pub fn homomorphism_residual(&self, model: &AlgebraModel) -> f64 {
        let n = model.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let ei = model.onb_section(i);
            let adj = self.rep(model, &model.involute(&ei));
            worst = worst.max(frobenius(&(adj - self.basis_reps[i].adjoint())));
            for j in 0..n {
                let ej = model.onb_section(j);
                let lhs = self.rep(model, &model.convolve(&ei, &ej));
                let rhs = &self.basis_reps[i] * &self.basis_reps[j];
                worst = worst.max(frobenius(&(lhs - rhs)));
            }
        }
        worst
    }
}

/// Quotient of a pre-Hilbert space with Gram matrix `gram` by its null
/// vectors: returns `T` (`r × n`) and its pseudo-inverse on the range.
fn null_quotient(gram: &CMat, tol: f64) -> Result<(CMat, CMat), InductionError> {
    let (vals, vecs) = hermitian_eigen(gram);
    let lmax = vals.iter().cloned().fold(0.0, f64::max);
    let lmin = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let cut = tol * lmax.max(1.0);
    if lmin < -cut {
        return Err(InductionError::NotPositive(lmin));
    }
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > cut).collect();
    let n = gram.nrows();
    let mut t = CMat::zeros(keep.len(), n);
    let mut tp = CMat::zeros(n, keep.len());
    for (r, &i) in keep.iter().enumerate() {
        let s = vals[i].sqrt();
        let v = vecs.column(i);
        t.set_row(r, &(v.adjoint() * real(s)));
        tp.set_column(r, &(v * real(1.0 / s)));
    }
    Ok((t, tp))
}

/// GNS representation of a positive functional `φ` on `model`.
pub fn gns(model: &AlgebraModel, phi: &State, tol: f64) -> Result<GnsTriple, InductionError> {
    let (t, tp) = null_quotient(&phi.gram(model), tol)?;
    let basis_reps = (0..model.dim())
        .map(|k| &t * model.rep(&model.onb_section(k)) * &tp)
        .collect();
    Ok(GnsTriple {
        dim: t.nrows(),
        basis_reps,
        cyclic: &t * model.coords(model.unit()),
    })
}

/// `Ind(L)` on the completion of `Y(x) ⊗ H` with
/// `⟨y⊗h, y'⊗h'⟩ = ⟨h, L(⟨y,y'⟩) h'⟩`, with cyclic vector
/// `a(x) = (1_{A_x} δ_x) ⊗ ξ_L`.
pub fn induce_representation(
    y: &InductionModule<'_>,
    l: &GnsTriple,
    tol: f64,
) -> Result<GnsTriple, InductionError> {
    let iso = &y.right().model;
    let h = l.dim;
    if h == 0 {
        return Err(InductionError::ZeroSpace);
    }
    let deg = frobenius(&(l.rep(iso, iso.unit()) - CMat::identity(h, h)));
    if deg > tol.sqrt() {
        return Err(InductionError::Degenerate(deg));
    }
    let n = y.dim();
    let basis: Vec<Section> = (0..n).map(|p| y.basis_element(p)).collect();
    let mut gram = CMat::zeros(n * h, n * h);
    for p in 0..n {
        for q in 0..n {
            let block = l.rep(iso, &y.inner(&basis[p], &basis[q]));
            gram.view_mut((p * h, q * h), (h, h)).copy_from(&block);
        }
    }
    let (t, tp) = null_quotient(&gram, tol)?;
    let m = y.left();
    let basis_reps = (0..m.dim())
        .map(|k| {
            let left = y.left_matrix(&m.onb_section(k));
            &t * left.kronecker(&CMat::identity(h, h)) * &tp
        })
        .collect();
    let x = y.unit();
    let gr = m.bundle().groupoid();
    let ax = Section::delta(
        gr.unit_arrow(x),
        m.unit().value(m.bundle(), gr.unit_arrow(x)),
    );
    let cyc = y.coords(&ax).kronecker(&l.cyclic);
    Ok(GnsTriple {
        dim: t.nrows(),
        basis_reps,
        cyclic: &t * cyc,
    })
}

/// `|⟨a(x), Ind(L)(f) a(x)⟩ - ⟨ξ_L, L(f|_{G^x_x}) ξ_L⟩|`.
pub fn cyclic_vector_residual(
    y: &InductionModule<'_>,
    l: &GnsTriple,
    ind: &GnsTriple,
    f: &Section,
) -> f64 {
    let lhs = ind.vector_state(y.left(), f);
    let rhs = l.vector_state(&y.right().model, &y.right().restrict(f));
    (lhs - rhs).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fellbundle::{trivial_bundle, MatrixAlgebra};
    use crate::groupoid::{cyclic_group, pair_groupoid, trivial_groupoid};
    use crate::linalg::{approx_eq, matrix_unit};

    fn model(g: crate::groupoid::FiniteGroupoid, a: &MatrixAlgebra) -> AlgebraModel {
        AlgebraModel::new(Arc::new(trivial_bundle(Arc::new(g), a)), 1e-9).unwrap()
    }

    #[test]
    fn unit_section_acts_trivially() {
        let m = model(pair_groupoid(3), &MatrixAlgebra::full(2));
        let y = InductionModule::new(&m, 1);
        for p in 0..y.dim() {
            let e = y.basis_element(p);
            assert!(y.left_act(m.unit(), &e).distance(&e) < 1e-12);
            assert!(y.right_act(&e, y.right().model.unit()).distance(&e) < 1e-12);
        }
    }

    #[test]
    fn delta_action_composes() {
        let m = model(pair_groupoid(2), &MatrixAlgebra::scalars());
        let g = m.bundle().groupoid();
        let a = |s: &str| g.arrow_by_name(s).unwrap();
        let one = CMat::from_element(1, 1, real(1.0));
        let y = InductionModule::new(&m, 0);
        let t = Section::delta(a("(1,*,1)"), one.clone());
        let moved = y.left_act(&Section::delta(a("(2,*,1)"), one.clone()), &t);
        assert!(moved.distance(&Section::delta(a("(2,*,1)"), one.clone())) < 1e-12);
        let killed = y.left_act(&Section::delta(a("(1,*,2)"), one), &t);
        assert!(killed.is_empty());
    }

    #[test]
    fn inner_of_delta_is_a_star_a() {
        let m = model(pair_groupoid(2), &MatrixAlgebra::full(2));
        let g = m.bundle().groupoid();
        let y = InductionModule::new(&m, 0);
        let v = CMat::from_fn(2, 2, |i, j| C64::new(i as f64 + 1.0, j as f64 - 0.5));
        let xi = Section::delta(g.arrow_by_name("(2,*,1)").unwrap(), v.clone());
        let ip = y.inner(&xi, &xi);
        assert!(ip.distance(&Section::delta(0, v.adjoint() * v)) < 1e-12);
        assert!(y.inner_min_eigenvalue(&xi) > -1e-12);
    }

    #[test]
    fn induced_from_point_is_defining_rep() {
        let m = model(pair_groupoid(2), &MatrixAlgebra::scalars());
        let y = InductionModule::new(&m, 0);
        let iso = &y.right().model;
        let l = gns(iso, &State::unit_trace(iso, &[1.0]), 1e-9).unwrap();
        assert_eq!(l.dim, 1);
        let ind = induce_representation(&y, &l, 1e-9).unwrap();
        assert_eq!(ind.dim, 2);
        assert!(ind.homomorphism_residual(&m) < 1e-12);
        assert!(ind.is_cyclic(1e-9));
    }

    #[test]
    fn gns_dimensions() {
        let m2 = model(trivial_groupoid(&["x".into()]), &MatrixAlgebra::full(2));
        let u = m2.bundle().groupoid().unit_arrow(0);
        let pure = State::from_densities(&m2, [(u, matrix_unit(2, 2, 0, 0))]);
        assert_eq!(gns(&m2, &pure, 1e-9).unwrap().dim, 2);
        let tr = State::unit_trace(&m2, &[1.0]);
        let t = gns(&m2, &tr, 1e-9).unwrap();
        assert_eq!(t.dim, 4);
        assert!(t.homomorphism_residual(&m2) < 1e-12);

        let z2 = model(cyclic_group(2), &MatrixAlgebra::scalars());
        let ch = State::from_basis_values(&z2, &[real(1.0), real(1.0)]);
        let t = gns(&z2, &ch, 1e-9).unwrap();
        assert_eq!(t.dim, 1);
        let f = z2.onb_section(1);
        assert!((t.vector_state(&z2, &f) - ch.eval(&f)).norm() < 1e-12);
    }

    #[test]
    fn gns_rejects_non_positive() {
        let z2 = model(cyclic_group(2), &MatrixAlgebra::scalars());
        let bad = State::from_basis_values(&z2, &[real(1.0), real(2.0)]);
        assert!(matches!(
            gns(&z2, &bad, 1e-9),
            Err(InductionError::NotPositive(_))
        ));
    }

    #[test]
    fn full_module_over_group() {
        let m = model(cyclic_group(3), &MatrixAlgebra::full(2));
        let y = InductionModule::new(&m, 0);
        assert_eq!(y.fullness_rank(1e-9), y.right().model.dim());
        let iso = &y.right().model;
        let l = gns(iso, &State::unit_trace(iso, &[1.0]), 1e-9).unwrap();
        let ind = induce_representation(&y, &l, 1e-9).unwrap();
        for k in 0..m.dim() {
            let f = m.onb_section(k);
            assert!(cyclic_vector_residual(&y, &l, &ind, &f) < 1e-12);
        }
        assert!(approx_eq(ind.dim as f64, 12.0, 0.0));
    }
}
