//! Seeded random instances: groupoids, algebras, actions, bundles,
//! sections, states and measures.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conv::{AlgebraModel, Section};
use crate::fellbundle::{
    pullback_bundle, trivial_bundle, FellBundle, Fiber, GroupoidAction, MatrixAlgebra,
};
use crate::groupoid::{
    cyclic_group, group_bundle, product, ArrowId, FiniteGroupoid, UnitId, UnitMeasure,
};
use crate::linalg::{c, identity, CMat, CVec, C64};
use crate::models::pair_model_groupoid;
use crate::states::{unit_space_average, State};

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut SampleRng) -> f64 {
    // Box–Muller
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

pub fn random_complex(rng: &mut SampleRng) -> C64 {
    c(gaussian(rng), gaussian(rng))
}

pub fn random_matrix(rng: &mut SampleRng, r: usize, k: usize) -> CMat {
    CMat::from_fn(r, k, |_, _| random_complex(rng))
}

/// Haar-distributed unitary (QR of a Ginibre matrix with phase fix).
pub fn random_unitary(rng: &mut SampleRng, d: usize) -> CMat {
    let qr = random_matrix(rng, d, d).qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = CMat::from_diagonal(&CVec::from_fn(d, |i, _| {
        let z = r[(i, i)];
        if z.norm() > 0.0 {
            z / z.norm()
        } else {
            c(1.0, 0.0)
        }
    }));
    q * phases
}

/// A standard algebra (full, diagonal or block-diagonal) of ambient size
/// at most `max_d`, with the unitary used to put it in general position.
#[derive(Clone, Debug)]
pub struct PlacedAlgebra {
    pub standard: MatrixAlgebra,
    pub frame: CMat,
}

impl PlacedAlgebra {
    pub fn algebra(&self) -> MatrixAlgebra {
        self.standard.conjugate(&self.frame)
    }
}

pub fn random_algebra(rng: &mut SampleRng, max_d: usize) -> PlacedAlgebra {
    let d = rng.gen_range(1..=max_d.max(1));
    let standard = match rng.gen_range(0..3) {
        0 => MatrixAlgebra::full(d),
        1 => MatrixAlgebra::diagonal(d),
        _ if d >= 3 => MatrixAlgebra::blocks(&[1, d - 1]),
        _ => MatrixAlgebra::full(d),
    };
    let frame = if rng.gen_bool(0.5) {
        random_unitary(rng, d)
    } else {
        identity(d)
    };
    PlacedAlgebra { standard, frame }
}

/// Pair models, products of pair models with cyclic groups, and bundles of
/// cyclic groups, with at most `max_arrows` arrows.
pub fn random_groupoid(rng: &mut SampleRng, max_arrows: usize) -> FiniteGroupoid {
    loop {
        let g = match rng.gen_range(0..3) {
            0 => {
                let n = rng.gen_range(1..=4);
                let m = rng.gen_range(1..=3);
                pair_model_groupoid(n, &point_names(m))
            }
            1 => {
                let n = rng.gen_range(1..=3);
                let m = rng.gen_range(1..=2);
                let k = rng.gen_range(2..=4);
                product(&pair_model_groupoid(n, &point_names(m)), &cyclic_group(k))
            }
            _ => {
                let units = rng.gen_range(1..=3);
                let orders: Vec<usize> = (0..units).map(|_| rng.gen_range(1..=4)).collect();
                group_bundle(&orders, &point_names(units))
            }
        };
        if g.num_arrows() <= max_arrows {
            return g;
        }
    }
}

pub fn point_names(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("x{i}")).collect()
}

/// `x0 → y` for every `y` in the orbit of `x0`.
fn transversal(g: &FiniteGroupoid, x0: UnitId) -> Vec<Option<ArrowId>> {
    let mut t = vec![None; g.num_units()];
    for a in g.source_fiber(x0) {
        t[g.tgt(a)].get_or_insert(a);
    }
    t
}

/// A generator of the isotropy group at `x` when it is cyclic, with the
/// power of each isotropy arrow.
fn cyclic_powers(g: &FiniteGroupoid, x: UnitId) -> Option<Vec<(ArrowId, usize)>> {
    let iso = g.isotropy_arrows(x);
    let e = g.unit_arrow(x);
    for &gen in &iso {
        let mut powers = vec![(e, 0)];
        let mut cur = gen;
        while cur != e {
            powers.push((cur, powers.len()));
            cur = g.compose(cur, gen).unwrap();
        }
        if powers.len() == iso.len() {
            return Some(powers);
        }
    }
    None
}

/// A random action: one placed algebra per orbit, conjugated by a random
/// unitary at every unit, and (when `twisted`) a nontrivial unitary
/// representation of cyclic isotropy by diagonal phases in the algebra's
/// frame.
pub fn random_action(
    rng: &mut SampleRng,
    g: Arc<FiniteGroupoid>,
    max_d: usize,
    twisted: bool,
) -> GroupoidAction {
    let mut algebras = vec![None; g.num_units()];
    let mut w: Vec<CMat> = vec![CMat::zeros(0, 0); g.num_units()];
    let mut root_rep: Vec<(UnitId, Vec<CMat>)> = vec![(0, Vec::new()); g.num_units()];
    let mut iso_index: Vec<Vec<(ArrowId, usize)>> = vec![Vec::new(); g.num_units()];
    for orbit in g.orbits() {
        let x0 = orbit[0];
        let placed = random_algebra(rng, max_d);
        let d = placed.standard.ambient_dim();
        // ρ(gen^k) = frame · D^k · frame^*
        let powers = cyclic_powers(&g, x0).unwrap_or_else(|| vec![(g.unit_arrow(x0), 0)]);
        let order = g.isotropy_arrows(x0).len();
        let gen_rep = if twisted && powers.len() == order && order > 1 {
            let dphase = CMat::from_diagonal(&CVec::from_fn(d, |_, _| {
                let k = rng.gen_range(0..order) as f64;
                C64::from_polar(1.0, std::f64::consts::TAU * k / order as f64)
            }));
            &placed.frame * dphase * placed.frame.adjoint()
        } else {
            identity(d)
        };
        let mut reps = vec![identity(d)];
        for _ in 1..powers.len() {
            let next = reps.last().unwrap() * &gen_rep;
            reps.push(next);
        }
        let a0 = placed.algebra();
        for &y in &orbit {
            w[y] = if y == x0 {
                identity(d)
            } else {
                random_unitary(rng, d)
            };
            algebras[y] = Some(a0.conjugate(&w[y]));
            root_rep[y] = (x0, reps.clone());
            iso_index[y] = powers.clone();
        }
    }
    let mut trans = vec![None; g.num_units()];
    for orbit in g.orbits() {
        let t = transversal(&g, orbit[0]);
        for &y in &orbit {
            trans[y] = t[y];
        }
    }
    let unitaries = g
        .arrows()
        .map(|a| {
            let (r, s) = (g.tgt(a), g.src(a));
            let (tr, ts) = (trans[r].unwrap(), trans[s].unwrap());
            let k = g.compose(g.inv(tr), g.compose(a, ts).unwrap()).unwrap();
            let (_, reps) = &root_rep[r];
            let p = iso_index[r]
                .iter()
                .find(|&&(b, _)| b == k)
                .map(|&(_, p)| p)
                .unwrap_or(0);
            &w[r] * &reps[p] * w[s].adjoint()
        })
        .collect();
    GroupoidAction::new(
        g,
        algebras.into_iter().map(Option::unwrap).collect(),
        unitaries,
    )
    .expect("shapes agree along orbits")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BundleKind {
    Trivial,
    Pullback,
    PairModel,
}

/// A saturated bundle of the given kind with fibres up to `M_max_d`.
pub fn random_bundle(
    rng: &mut SampleRng,
    kind: BundleKind,
    max_d: usize,
    max_arrows: usize,
) -> FellBundle {
    match kind {
        BundleKind::Trivial => {
            let g = Arc::new(random_groupoid(rng, max_arrows));
            trivial_bundle(g, &random_algebra(rng, max_d).algebra())
        }
        BundleKind::Pullback => {
            let g = Arc::new(random_groupoid(rng, max_arrows));
            let twisted = rng.gen_bool(0.5);
            pullback_bundle(&random_action(rng, g, max_d, twisted)).expect("action shapes agree")
        }
        BundleKind::PairModel => {
            let (n, m) = loop {
                let n = rng.gen_range(1..=4);
                let m = rng.gen_range(1..=3);
                if n * n * m <= max_arrows {
                    break (n, m);
                }
            };
            let g = Arc::new(pair_model_groupoid(n, &point_names(m)));
            trivial_bundle(g, &random_algebra(rng, max_d).algebra())
        }
    }
}

pub fn random_kind(rng: &mut SampleRng) -> BundleKind {
    *[
        BundleKind::Trivial,
        BundleKind::Pullback,
        BundleKind::PairModel,
    ]
    .choose(rng)
    .unwrap()
}

pub fn random_fiber_element(rng: &mut SampleRng, f: &Fiber) -> CMat {
    let coords: Vec<C64> = (0..f.dim()).map(|_| random_complex(rng)).collect();
    f.onb()
        .iter()
        .zip(coords)
        .fold(CMat::zeros(f.rows(), f.cols()), |acc, (e, z)| acc + e * z)
}

/// Random coordinates on a random subset of arrows (all arrows when
/// `dense`).
pub fn random_section(rng: &mut SampleRng, model: &AlgebraModel, dense: bool) -> Section {
    let b = model.bundle();
    let mut s = Section::zero();
    for a in b.groupoid().arrows() {
        if (dense || rng.gen_bool(0.6)) && b.fiber(a).dim() > 0 {
            s.accumulate(a, &random_fiber_element(rng, b.fiber(a)));
        }
    }
    s
}

/// A random section supported on `arrows`.
pub fn random_section_on(rng: &mut SampleRng, b: &FellBundle, arrows: &[ArrowId]) -> Section {
    let mut s = Section::zero();
    for &a in arrows {
        if b.fiber(a).dim() > 0 {
            s.accumulate(a, &random_fiber_element(rng, b.fiber(a)));
        }
    }
    s
}

/// A mixture of up to three vector states of the regular representation.
pub fn random_state(rng: &mut SampleRng, model: &AlgebraModel) -> State {
    let n = model.dim();
    let reps: Vec<CMat> = (0..n).map(|k| model.rep(&model.onb_section(k))).collect();
    let h = reps.first().map_or(0, |r| r.nrows());
    let terms = rng.gen_range(1..=3);
    let mut values = CVec::zeros(n);
    let mut total = 0.0;
    let unit = model.rep(model.unit());
    for _ in 0..terms {
        let xi = CVec::from_fn(h, |_, _| random_complex(rng));
        let w: f64 = rng.gen_range(0.1..1.0);
        let norm = xi.dotc(&(&unit * &xi)).re;
        for k in 0..n {
            values[k] += xi.dotc(&(&reps[k] * &xi)) * (w / norm);
        }
        total += w;
    }
    State::from_onb_values(model, &(values / c(total, 0.0)))
}

/// A random state with every unit fibre in its centralizer.
pub fn random_centralizing_state(rng: &mut SampleRng, model: &AlgebraModel) -> State {
    unit_space_average(model, &random_state(rng, model))
}

/// A random probability measure supported on a nonempty random subset of
/// `candidates`.
pub fn random_probability(
    rng: &mut SampleRng,
    g: &FiniteGroupoid,
    candidates: &[UnitId],
) -> UnitMeasure {
    let mut w = vec![0.0; g.num_units()];
    let mut any = false;
    for &x in candidates {
        if rng.gen_bool(0.7) {
            w[x] = rng.gen_range(0.05..1.0);
            any = true;
        }
    }
    if !any {
        w[*candidates.choose(rng).unwrap()] = 1.0;
    }
    let t: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= t);
    UnitMeasure::new(g, w).expect("nonnegative")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fellbundle::validate_bundle;
    use crate::groupoid::validate_groupoid;
    use crate::linalg::frobenius;
    use crate::states::centralizer_contains;

    #[test]
    fn unitaries_are_unitary() {
        let mut r = rng(1);
        for d in 1..4 {
            let u = random_unitary(&mut r, d);
            assert!(frobenius(&(u.adjoint() * &u - identity(d))) < 1e-12);
        }
    }

    #[test]
    fn random_instances_are_valid() {
        let mut r = rng(2);
        for _ in 0..20 {
            let g = random_groupoid(&mut r, 30);
            assert!(validate_groupoid(&g).is_empty());
            let act = random_action(&mut r, Arc::new(g), 3, true);
            assert!(act.validate(1e-9).is_empty(), "{:?}", act.validate(1e-9));
            let b = pullback_bundle(&act).unwrap();
            let rep = validate_bundle(&b, 1e-9);
            assert!(rep.is_empty(), "{rep:?}");
        }
    }

    #[test]
    fn centralizing_states() {
        let mut r = rng(3);
        for kind in [
            BundleKind::Trivial,
            BundleKind::Pullback,
            BundleKind::PairModel,
        ] {
            let b = random_bundle(&mut r, kind, 2, 12);
            let m = AlgebraModel::new(Arc::new(b), 1e-9).unwrap();
            let phi = random_centralizing_state(&mut r, &m);
            assert!(phi.certify(&m, 1e-9).is_state());
            assert!(centralizer_contains(&m, &phi, &m.unit_space_basis(), 1e-9).holds);
        }
    }
}
