//! The groupoid crossed product `A ⋊ G` of a groupoid dynamical system,
//! computed directly in `A`-valued coordinates, and its identification
//! `b δ_γ ↦ b U_γ` with `C*(G; r^*A)`.

use std::collections::BTreeMap;

use crate::conv::{Section, StructureConstants};
use crate::fellbundle::{Fiber, GroupoidAction};
use crate::groupoid::ArrowId;
use crate::linalg::C64;

/// `A ⋊ G`: sections `γ ↦ f(γ) ∈ A(r(γ))` with
/// `(f * g)(γ) = Σ_{η ∈ G^{r(γ)}} f(η) α_η(g(η^{-1}γ))` and
/// `f^*(γ) = α_γ(f(γ^{-1})^*)`.
#[derive(Clone, Debug)]
pub struct CrossedProduct<'a> {
    act: &'a GroupoidAction,
    unit_fibers: Vec<Fiber>,
    offsets: Vec<usize>,
}

impl<'a> CrossedProduct<'a> {
    pub fn new(act: &'a GroupoidAction) -> Self {
        let g = act.groupoid();
        let unit_fibers = g
            .units()
            .map(|x| {
                let a = act.algebra(x);
                Fiber::new(a.ambient_dim(), a.ambient_dim(), a.basis().to_vec())
            })
            .collect::<Vec<_>>();
        let mut offsets = vec![0];
        for a in g.arrows() {
            offsets.push(offsets[a] + act.algebra(g.tgt(a)).dim());
        }
        Self {
            act,
            unit_fibers,
            offsets,
        }
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Basis element `b_i δ_γ`.
    pub fn basis_element(&self, a: ArrowId, i: usize) -> Section {
        let g = self.act.groupoid();
        Section::delta(a, self.act.algebra(g.tgt(a)).basis()[i].clone())
    }

    pub fn convolve(&self, f: &Section, h: &Section) -> Section {
        let g = self.act.groupoid();
        let mut out = Section::zero();
        for (eta, a) in f.iter() {
            for (zeta, b) in h.iter() {
                if let Some(ez) = g.compose(eta, zeta) {
                    out.accumulate(ez, &(a * self.act.alpha(eta, b)));
                }
            }
        }
        out
    }

    pub fn involute(&self, f: &Section) -> Section {
        let g = self.act.groupoid();
        let mut out = Section::zero();
        for (eta, a) in f.iter() {
            let ei = g.inv(eta);
            out.accumulate(ei, &self.act.alpha(ei, &a.adjoint()));
        }
        out
    }

    /// `Θ(f)(γ) = f(γ) U_γ`, a section of `r^*A`.
    pub fn theta(&self, f: &Section) -> Section {
        f.map(|a, m| m * self.act.unitary(a))
    }

    /// `Θ^{-1}(F)(γ) = F(γ) U_γ^*`.
    pub fn theta_inverse(&self, f: &Section) -> Section {
        f.map(|a, m| m * self.act.unitary(a).adjoint())
    }

    fn coords(&self, a: ArrowId, m: &crate::linalg::CMat) -> Vec<C64> {
        let g = self.act.groupoid();
        self.unit_fibers[g.tgt(a)].coords(m)
    }

    /// Structure constants in the basis `b_i δ_γ` ordered by arrow, then `i`.
    pub fn structure_constants(&self) -> StructureConstants {
        let g = self.act.groupoid();
        let cut = 1e-14;
        let basis: Vec<(ArrowId, usize)> = g
            .arrows()
            .flat_map(|a| (0..self.offsets[a + 1] - self.offsets[a]).map(move |i| (a, i)))
            .collect();
        let mut product = Vec::new();
        let mut involution = Vec::new();
        for (i, &(a, ia)) in basis.iter().enumerate() {
            let ei = self.basis_element(a, ia);
            for (j, &(c, jc)) in basis.iter().enumerate() {
                let p = self.convolve(&ei, &self.basis_element(c, jc));
                for (t, m) in p.iter() {
                    for (k, v) in self.coords(t, m).into_iter().enumerate() {
                        if v.norm() > cut {
                            product.push((i, j, self.offsets[t] + k, [v.re, v.im]));
                        }
                    }
                }
            }
            for (t, m) in self.involute(&ei).iter() {
                for (k, v) in self.coords(t, m).into_iter().enumerate() {
                    if v.norm() > cut {
                        involution.push((i, self.offsets[t] + k, [v.re, v.im]));
                    }
                }
            }
        }
        StructureConstants {
            basis: basis
                .iter()
                .map(|&(a, i)| (g.arrow_name(a).to_string(), i))
                .collect(),
            product,
            involution,
        }
    }
}

/// Max coefficient difference between two structure-constant tables over
/// the same basis; `None` when the bases differ.
pub fn structure_constant_distance(a: &StructureConstants, b: &StructureConstants) -> Option<f64> {
    if a.basis != b.basis {
        return None;
    }
    fn diff<K: Ord + Copy>(
        x: impl Iterator<Item = (K, [f64; 2])>,
        y: impl Iterator<Item = (K, [f64; 2])>,
    ) -> f64 {
        let mut m: BTreeMap<K, C64> = BTreeMap::new();
        for (k, v) in x {
            *m.entry(k).or_default() += C64::new(v[0], v[1]);
        }
        for (k, v) in y {
            *m.entry(k).or_default() -= C64::new(v[0], v[1]);
        }
        m.values().map(|z| z.norm()).fold(0.0, f64::max)
    }
    let p = diff(
        a.product.iter().map(|&(i, j, k, v)| ((i, j, k), v)),
        b.product.iter().map(|&(i, j, k, v)| ((i, j, k), v)),
    );
    let s = diff(
        a.involution.iter().map(|&(i, k, v)| ((i, k), v)),
        b.involution.iter().map(|&(i, k, v)| ((i, k), v)),
    );
    Some(p.max(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv::AlgebraModel;
    use crate::fellbundle::{pullback_bundle, MatrixAlgebra};
    use crate::groupoid::{cyclic_group, pair_groupoid};
    use crate::linalg::{identity, real, CMat};
    use std::sync::Arc;

    fn swap() -> GroupoidAction {
        let g = Arc::new(cyclic_group(2));
        let s = CMat::from_row_slice(2, 2, &[real(0.0), real(1.0), real(1.0), real(0.0)]);
        GroupoidAction::new(g, vec![MatrixAlgebra::diagonal(2)], vec![identity(2), s]).unwrap()
    }

    #[test]
    fn swap_crossed_product_matches_pullback() {
        let act = swap();
        let cp = CrossedProduct::new(&act);
        assert_eq!(cp.dim(), 4);
        let model = AlgebraModel::new(Arc::new(pullback_bundle(&act).unwrap()), 1e-9).unwrap();
        let d =
            structure_constant_distance(&cp.structure_constants(), &model.structure_constants())
                .unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn theta_is_multiplicative() {
        let act = swap();
        let cp = CrossedProduct::new(&act);
        let model = AlgebraModel::new(Arc::new(pullback_bundle(&act).unwrap()), 1e-9).unwrap();
        for (a, i) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            for (c, j) in [(0, 1), (1, 0), (1, 1)] {
                let (f, h) = (cp.basis_element(a, i), cp.basis_element(c, j));
                let lhs = cp.theta(&cp.convolve(&f, &h));
                let rhs = model.convolve(&cp.theta(&f), &cp.theta(&h));
                assert!(lhs.distance(&rhs) < 1e-12);
                assert!(
                    cp.theta(&cp.involute(&f))
                        .distance(&model.involute(&cp.theta(&f)))
                        < 1e-12
                );
                assert!(cp.theta_inverse(&cp.theta(&f)).distance(&f) < 1e-12);
            }
        }
    }

    #[test]
    fn trivial_action_on_p2() {
        let act = GroupoidAction::trivial(Arc::new(pair_groupoid(2)), &MatrixAlgebra::full(2));
        let cp = CrossedProduct::new(&act);
        assert_eq!(cp.dim(), 16);
        let model = AlgebraModel::new(Arc::new(pullback_bundle(&act).unwrap()), 1e-9).unwrap();
        let d =
            structure_constant_distance(&cp.structure_constants(), &model.structure_constants())
                .unwrap();
        assert!(d < 1e-12);
    }
}
