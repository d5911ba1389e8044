//! The convolution *-algebra `C_c(G; A)` of a Fell bundle over a finite
//! groupoid, its I-norm, and its C*-norm computed in the left regular
//! representation.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fellbundle::{fiber_norm, FellBundle};
use crate::groupoid::{ArrowId, UnitId};
use crate::linalg::{frobenius, hs_inner, op_norm, rank, real, CMat, CVec, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvError {
    #[error("section value over `{arrow}` has shape {got:?}, bundle fibre has {expected:?}")]
    BundleMismatch {
        arrow: String,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("section refers to arrow #{0} outside the groupoid")]
    UnknownArrow(ArrowId),
    #[error("unit fibre over `{0}` has no unit")]
    NoUnit(String),
    #[error("groupoid is not of pair-model shape: {0}")]
    NotPairShape(String),
}

/// A finitely supported section `γ ↦ f(γ) ∈ A_γ`, stored sparsely as ambient
/// matrices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Section {
    values: BTreeMap<ArrowId, CMat>,
}

impl Section {
    pub fn zero() -> Self {
        Self::default()
    }

    /// `a · δ_γ`.
    pub fn delta(a: ArrowId, value: CMat) -> Self {
        let mut s = Self::zero();
        s.values.insert(a, value);
        s
    }

    pub fn from_values(values: impl IntoIterator<Item = (ArrowId, CMat)>) -> Self {
        let mut s = Self::zero();
        for (a, m) in values {
            s.accumulate(a, &m);
        }
        s
    }

    pub fn get(&self, a: ArrowId) -> Option<&CMat> {
        self.values.get(&a)
    }

    pub fn value(&self, b: &FellBundle, a: ArrowId) -> CMat {
        self.values.get(&a).cloned().unwrap_or_else(|| {
            let (r, c) = b.shape(a);
            CMat::zeros(r, c)
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (ArrowId, &CMat)> {
        self.values.iter().map(|(a, m)| (*a, m))
    }

    pub fn support(&self) -> Vec<ArrowId> {
        self.values.keys().copied().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn accumulate(&mut self, a: ArrowId, m: &CMat) {
        match self.values.get_mut(&a) {
            Some(v) => *v += m,
            None => {
                self.values.insert(a, m.clone());
            }
        }
    }

    pub fn add(&self, other: &Section) -> Section {
        let mut out = self.clone();
        for (a, m) in other.iter() {
            out.accumulate(a, m);
        }
        out
    }

    pub fn sub(&self, other: &Section) -> Section {
        self.add(&other.scale(real(-1.0)))
    }

    pub fn scale(&self, k: C64) -> Section {
        Section {
            values: self.values.iter().map(|(a, m)| (*a, m * k)).collect(),
        }
    }

    /// Pointwise map over the values.
    pub fn map(&self, f: impl Fn(ArrowId, &CMat) -> CMat) -> Section {
        Section {
            values: self.values.iter().map(|(a, m)| (*a, f(*a, m))).collect(),
        }
    }

    /// Drop values with Frobenius norm at most `tol`.
    pub fn pruned(&self, tol: f64) -> Section {
        Section {
            values: self
                .values
                .iter()
                .filter(|(_, m)| frobenius(m) > tol)
                .map(|(a, m)| (*a, m.clone()))
                .collect(),
        }
    }

    /// Largest Frobenius distance over arrows.
    pub fn distance(&self, other: &Section) -> f64 {
        let diff = self.sub(other);
        diff.values.values().map(frobenius).fold(0.0, f64::max)
    }
}

/// Shape check of every value against the bundle.
pub fn check_section(b: &FellBundle, f: &Section) -> Result<(), ConvError> {
    for (a, m) in f.iter() {
        if a >= b.groupoid().num_arrows() {
            return Err(ConvError::UnknownArrow(a));
        }
        if m.shape() != b.shape(a) {
            return Err(ConvError::BundleMismatch {
                arrow: b.groupoid().arrow_name(a).to_string(),
                expected: b.shape(a),
                got: m.shape(),
            });
        }
    }
    Ok(())
}

/// Whether every value lies in its fibre.
pub fn in_bundle(b: &FellBundle, f: &Section, tol: f64) -> bool {
    check_section(b, f).is_ok() && f.iter().all(|(a, m)| b.fiber(a).contains(m, tol))
}

/// `f * g(γ) = Σ_{αβ = γ} f(α) g(β)`.
pub fn convolve(b: &FellBundle, f: &Section, g: &Section) -> Result<Section, ConvError> {
    check_section(b, f)?;
    check_section(b, g)?;
    let gr = b.groupoid();
    let mut out = Section::zero();
    for (a, x) in f.iter() {
        for (c, y) in g.iter() {
            if let Some(ac) = gr.compose(a, c) {
                out.accumulate(ac, &(x * y));
            }
        }
    }
    Ok(out)
}

/// `f^*(γ) = f(γ^{-1})^*`.
pub fn involute(b: &FellBundle, f: &Section) -> Section {
    let gr = b.groupoid();
    Section::from_values(f.iter().map(|(a, m)| (gr.inv(a), m.adjoint())))
}

/// `max(sup_x Σ_{γ ∈ G^x} ‖f(γ)‖, sup_x Σ_{γ ∈ G_x} ‖f(γ)‖)`.
pub fn i_norm(b: &FellBundle, f: &Section) -> f64 {
    let gr = b.groupoid();
    let mut by_range = vec![0.0; gr.num_units()];
    let mut by_source = vec![0.0; gr.num_units()];
    for (a, m) in f.iter() {
        let n = fiber_norm(m);
        by_range[gr.tgt(a)] += n;
        by_source[gr.src(a)] += n;
    }
    by_range.into_iter().chain(by_source).fold(0.0, f64::max)
}

/// The unit `x ↦ 1_{A_x}` of `C_c(G; A)`.
pub fn unit_section(b: &FellBundle, tol: f64) -> Result<Section, ConvError> {
    let gr = b.groupoid();
    let mut s = Section::zero();
    for x in gr.units() {
        let u = b
            .unit_fiber_unit(x, tol)
            .ok_or_else(|| ConvError::NoUnit(gr.unit_name(x).to_string()))?;
        s.values.insert(gr.unit_arrow(x), u);
    }
    Ok(s)
}

/// `1_{A_x} · δ_x`.
pub fn unit_at(b: &FellBundle, x: UnitId, tol: f64) -> Result<Section, ConvError> {
    let gr = b.groupoid();
    let u = b
        .unit_fiber_unit(x, tol)
        .ok_or_else(|| ConvError::NoUnit(gr.unit_name(x).to_string()))?;
    Ok(Section::delta(gr.unit_arrow(x), u))
}

/// Structure constants `e_i e_j = Σ_k c_{ijk} e_k` in the declared basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureConstants {
    /// `(arrow id, basis index)` per algebra basis element.
    pub basis: Vec<(String, usize)>,
    /// Nonzero `(i, j, k, [re, im])`.
    pub product: Vec<(usize, usize, usize, [f64; 2])>,
    /// Nonzero `(i, k, [re, im])` with `e_i^* = Σ_k t_{ik} e_k`.
    pub involution: Vec<(usize, usize, [f64; 2])>,
}

/// Finite-dimensional model of `C^*(G; A)`: basis enumeration, structure
/// constants and the left regular representation on `⊕_γ A_γ` with
/// Hilbert–Schmidt inner products (the direct sum of the induction modules
/// over all units).
#[derive(Clone, Debug)]
pub struct AlgebraModel {
    bundle: Arc<FellBundle>,
    basis: Vec<(ArrowId, usize)>,
    basis_offsets: Vec<usize>,
    onb_offsets: Vec<usize>,
    unit: Section,
    tol: f64,
    isotropy: Vec<OnceLock<Arc<IsotropyAlgebra>>>,
}

impl AlgebraModel {
    pub fn new(bundle: Arc<FellBundle>, tol: f64) -> Result<Self, ConvError> {
        let unit = unit_section(&bundle, tol)?;
        let mut basis = Vec::new();
        let mut basis_offsets = Vec::new();
        let mut onb_offsets = Vec::new();
        let mut onb_total = 0;
        for a in bundle.groupoid().arrows() {
            basis_offsets.push(basis.len());
            onb_offsets.push(onb_total);
            for i in 0..bundle.fiber(a).basis().len() {
                basis.push((a, i));
            }
            onb_total += bundle.fiber(a).dim();
        }
        onb_offsets.push(onb_total);
        basis_offsets.push(basis.len());
        let isotropy = bundle.groupoid().units().map(|_| OnceLock::new()).collect();
        Ok(Self {
            bundle,
            basis,
            basis_offsets,
            onb_offsets,
            unit,
            tol,
            isotropy,
        })
    }

    /// `C^*(G^x_x; A(x))`, built on first use.
    pub fn isotropy(&self, x: UnitId) -> &Arc<IsotropyAlgebra> {
        self.isotropy[x].get_or_init(|| {
            Arc::new(IsotropyAlgebra::new(self, x).expect("isotropy of a unital bundle is unital"))
        })
    }

    /// Orthonormal basis of `C_0(G^(0); A|_{G^(0)})`: elements `a · δ_x`.
    pub fn unit_space_basis(&self) -> Vec<Section> {
        let g = self.bundle.groupoid();
        g.units()
            .flat_map(|x| self.onb_range(g.unit_arrow(x)))
            .map(|k| self.onb_section(k))
            .collect()
    }

    pub fn bundle(&self) -> &FellBundle {
        &self.bundle
    }

    pub fn bundle_arc(&self) -> Arc<FellBundle> {
        self.bundle.clone()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn unit(&self) -> &Section {
        &self.unit
    }

    /// Dimension of the algebra (= dimension of the regular representation).
    pub fn dim(&self) -> usize {
        *self.onb_offsets.last().unwrap()
    }

    /// Declared basis as `(arrow, index)` pairs.
    pub fn basis(&self) -> &[(ArrowId, usize)] {
        &self.basis
    }

    pub fn basis_index(&self, a: ArrowId, i: usize) -> usize {
        self.basis_offsets[a] + i
    }

    pub fn basis_section(&self, k: usize) -> Section {
        let (a, i) = self.basis[k];
        Section::delta(a, self.bundle.fiber(a).basis()[i].clone())
    }

    /// Orthonormal basis element `k` (Hilbert–Schmidt), supported on one arrow.
    pub fn onb_element(&self, k: usize) -> (ArrowId, &CMat) {
        let a = self.onb_offsets.partition_point(|&o| o <= k) - 1;
        (a, &self.bundle.fiber(a).onb()[k - self.onb_offsets[a]])
    }

    pub fn onb_section(&self, k: usize) -> Section {
        let (a, m) = self.onb_element(k);
        Section::delta(a, m.clone())
    }

    pub fn onb_range(&self, a: ArrowId) -> std::ops::Range<usize> {
        self.onb_offsets[a]..self.onb_offsets[a + 1]
    }

    /// Orthonormal coordinates of a section (its vector in the regular
    /// representation space).
    pub fn coords(&self, f: &Section) -> CVec {
        let mut v = CVec::zeros(self.dim());
        for (a, m) in f.iter() {
            for (j, e) in self.bundle.fiber(a).onb().iter().enumerate() {
                v[self.onb_offsets[a] + j] = hs_inner(e, m);
            }
        }
        v
    }

    pub fn from_coords(&self, v: &CVec) -> Section {
        let mut s = Section::zero();
        for k in 0..self.dim() {
            if v[k] != C64::new(0.0, 0.0) {
                let (a, e) = self.onb_element(k);
                s.accumulate(a, &(e * v[k]));
            }
        }
        s
    }

    pub fn convolve(&self, f: &Section, g: &Section) -> Section {
        convolve(&self.bundle, f, g).expect("sections of this model")
    }

    pub fn involute(&self, f: &Section) -> Section {
        involute(&self.bundle, f)
    }

    /// Matrix of left multiplication by `f` on `⊕_γ A_γ`.
    pub fn rep(&self, f: &Section) -> CMat {
        let gr = self.bundle.groupoid();
        let n = self.dim();
        let mut m = CMat::zeros(n, n);
        for col in 0..n {
            let (w, e) = self.onb_element(col);
            for (tau, val) in f.iter() {
                let Some(tw) = gr.compose(tau, w) else {
                    continue;
                };
                let prod = val * e;
                for (j, basis) in self.bundle.fiber(tw).onb().iter().enumerate() {
                    m[(self.onb_offsets[tw] + j, col)] += hs_inner(basis, &prod);
                }
            }
        }
        m
    }

    /// Operator norm of `f` in the regular representation.
    pub fn cstar_norm(&self, f: &Section) -> f64 {
        op_norm(&self.rep(f))
    }

    /// Rank of the regular representation on the algebra basis.
    pub fn rep_rank(&self) -> usize {
        let n = self.dim();
        let mut stacked = CMat::zeros(n * n, n);
        for k in 0..n {
            let r = self.rep(&self.onb_section(k));
            for (i, v) in r.iter().enumerate() {
                stacked[(i, k)] = *v;
            }
        }
        rank(&stacked, self.tol)
    }

    pub fn is_faithful(&self) -> bool {
        self.rep_rank() == self.dim()
    }

    pub fn structure_constants(&self) -> StructureConstants {
        let b = &*self.bundle;
        let gr = b.groupoid();
        let cut = 1e-14;
        let mut product = Vec::new();
        for (i, &(a, ia)) in self.basis.iter().enumerate() {
            for (j, &(c, jc)) in self.basis.iter().enumerate() {
                let Some(ac) = gr.compose(a, c) else { continue };
                let p = &b.fiber(a).basis()[ia] * &b.fiber(c).basis()[jc];
                for (k, v) in b.fiber(ac).coords(&p).into_iter().enumerate() {
                    if v.norm() > cut {
                        product.push((i, j, self.basis_index(ac, k), [v.re, v.im]));
                    }
                }
            }
        }
        let mut involution = Vec::new();
        for (i, &(a, ia)) in self.basis.iter().enumerate() {
            let ai = gr.inv(a);
            let adj = b.fiber(a).basis()[ia].adjoint();
            for (k, v) in b.fiber(ai).coords(&adj).into_iter().enumerate() {
                if v.norm() > cut {
                    involution.push((i, self.basis_index(ai, k), [v.re, v.im]));
                }
            }
        }
        StructureConstants {
            basis: self
                .basis
                .iter()
                .map(|&(a, i)| (gr.arrow_name(a).to_string(), i))
                .collect(),
            product,
            involution,
        }
    }
}

/// The isotropy algebra `C^*(G^x_x; A(x))` with its arrow correspondence
/// to the ambient groupoid.
#[derive(Clone, Debug)]
pub struct IsotropyAlgebra {
    pub unit: UnitId,
    pub model: AlgebraModel,
    /// Local arrow -> arrow of the ambient groupoid.
    pub parent: Vec<ArrowId>,
    local: HashMap<ArrowId, ArrowId>,
}

impl IsotropyAlgebra {
    pub fn new(model: &AlgebraModel, x: UnitId) -> Result<Self, ConvError> {
        let b = model.bundle();
        let g = b.groupoid();
        let sub = Arc::new(
            crate::groupoid::isotropy(g, x).map_err(|_| ConvError::NoUnit(format!("#{x}")))?,
        );
        let parent = g.embed_arrows(&sub).expect("isotropy shares arrow ids");
        let restricted = crate::fellbundle::restrict(b, sub).expect("isotropy is a subgroupoid");
        let local = parent.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        Ok(Self {
            unit: x,
            model: AlgebraModel::new(Arc::new(restricted), model.tol())?,
            parent,
            local,
        })
    }

    /// Local index of an ambient arrow, if it lies in `G^x_x`.
    pub fn local(&self, a: ArrowId) -> Option<ArrowId> {
        self.local.get(&a).copied()
    }

    /// `f|_{G^x_x}` as a section of the isotropy bundle.
    pub fn restrict(&self, f: &Section) -> Section {
        Section::from_values(
            f.iter()
                .filter_map(|(a, m)| self.local(a).map(|l| (l, m.clone()))),
        )
    }

    /// Extension by zero to the ambient groupoid.
    pub fn extend(&self, f: &Section) -> Section {
        Section::from_values(f.iter().map(|(l, m)| (self.parent[l], m.clone())))
    }
}

/// Identification of a principal groupoid whose orbits all have `n`
/// elements with `N × X × N`: `X` indexes the orbits, and units within an
/// orbit are ordered by unit index.
#[derive(Clone, Debug, PartialEq)]
pub struct PairShape {
    pub n: usize,
    pub orbits: Vec<Vec<UnitId>>,
    arrow_at: HashMap<(usize, usize, usize), ArrowId>,
}

impl PairShape {
    pub fn detect(b: &FellBundle) -> Result<Self, ConvError> {
        let g = b.groupoid();
        if !g.is_principal() {
            return Err(ConvError::NotPairShape("nontrivial isotropy".into()));
        }
        let orbits = g.orbits();
        let n = orbits[0].len();
        if orbits.iter().any(|o| o.len() != n) {
            return Err(ConvError::NotPairShape("orbits of unequal size".into()));
        }
        let mut pos = vec![(0, 0); g.num_units()];
        for (xi, o) in orbits.iter().enumerate() {
            for (h, &u) in o.iter().enumerate() {
                pos[u] = (xi, h);
            }
        }
        let mut arrow_at = HashMap::new();
        for a in g.arrows() {
            let (x, h) = pos[g.tgt(a)];
            let (_, k) = pos[g.src(a)];
            if arrow_at.insert((x, h, k), a).is_some() {
                return Err(ConvError::NotPairShape("parallel arrows".into()));
            }
        }
        if arrow_at.len() != orbits.len() * n * n {
            return Err(ConvError::NotPairShape(
                "orbit is not a full pair groupoid".into(),
            ));
        }
        Ok(Self {
            n,
            orbits,
            arrow_at,
        })
    }

    pub fn arrow(&self, x: usize, h: usize, k: usize) -> ArrowId {
        self.arrow_at[&(x, h, k)]
    }
}

/// `f ↦ (f_{h,k}(x))`: one block matrix per point `x`, block `(h, k)` being
/// `f(h, x, k)`.
pub fn structure_map(b: &FellBundle, shape: &PairShape, f: &Section) -> Vec<CMat> {
    shape
        .orbits
        .iter()
        .enumerate()
        .map(|(xi, orbit)| {
            let dims: Vec<usize> = orbit.iter().map(|&u| b.unit_dim(u)).collect();
            let offs: Vec<usize> = dims
                .iter()
                .scan(0, |acc, d| {
                    let o = *acc;
                    *acc += d;
                    Some(o)
                })
                .collect();
            let total: usize = dims.iter().sum();
            let mut m = CMat::zeros(total, total);
            for h in 0..shape.n {
                for k in 0..shape.n {
                    if let Some(v) = f.get(shape.arrow(xi, h, k)) {
                        m.view_mut((offs[h], offs[k]), (dims[h], dims[k]))
                            .copy_from(v);
                    }
                }
            }
            m
        })
        .collect()
}

/// Inverse of [`structure_map`] (block extraction).
pub fn structure_map_inverse(b: &FellBundle, shape: &PairShape, mats: &[CMat]) -> Section {
    let mut s = Section::zero();
    for (xi, orbit) in shape.orbits.iter().enumerate() {
        let dims: Vec<usize> = orbit.iter().map(|&u| b.unit_dim(u)).collect();
        let mut offs = vec![0];
        for d in &dims {
            offs.push(offs.last().unwrap() + d);
        }
        for h in 0..shape.n {
            for k in 0..shape.n {
                let block = mats[xi]
                    .view((offs[h], offs[k]), (dims[h], dims[k]))
                    .into_owned();
                if frobenius(&block) > 0.0 {
                    s.accumulate(shape.arrow(xi, h, k), &block);
                }
            }
        }
    }
    s
}
