//! Finite étale groupoids with a stored composition table, real cocycles
//! and measures on the unit space.
//!
//! Composition follows the range-first convention: `compose(γ, η) = γη`
//! is defined exactly when `s(γ) = r(η)`, and then `r(γη) = r(γ)`,
//! `s(γη) = s(η)`.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::approx_eq;
use crate::report::{Axiom, ValidationReport};

pub type ArrowId = usize;
pub type UnitId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupoidError {
    #[error("duplicate unit `{0}`")]
    DuplicateUnit(String),
    #[error("duplicate arrow `{0}`")]
    DuplicateArrow(String),
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("unknown arrow `{0}`")]
    UnknownArrow(String),
    #[error("no inverse declared for arrow `{0}`")]
    MissingInverse(String),
    #[error("no unit arrow found for unit `{0}`")]
    MissingUnitArrow(String),
    #[error("conflicting composition entries for (`{0}`, `{1}`)")]
    ConflictingCompose(String, String),
    #[error("cocycle has {got} values for {expected} arrows")]
    CocycleLength { expected: usize, got: usize },
    #[error("measure has {got} weights for {expected} units")]
    MeasureLength { expected: usize, got: usize },
    #[error("negative weight {weight} at unit `{unit}`")]
    NegativeWeight { unit: String, weight: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arrow {
    pub id: String,
    pub src: UnitId,
    pub tgt: UnitId,
}

/// A finite groupoid given by explicit tables. The data is checked only for
/// referential integrity on construction; [`validate_groupoid`] reports
/// axiom violations.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteGroupoid {
    units: Vec<String>,
    arrows: Vec<Arrow>,
    compose: Vec<Option<ArrowId>>,
    inv: Vec<ArrowId>,
    unit_arrow: Vec<ArrowId>,
    unit_index: HashMap<String, UnitId>,
    arrow_index: HashMap<String, ArrowId>,
}

impl FiniteGroupoid {
    /// Build from indexed data. `compose(a, b)` is queried for every pair.
    pub fn from_indexed(
        units: Vec<String>,
        arrows: Vec<Arrow>,
        compose: impl Fn(ArrowId, ArrowId) -> Option<ArrowId>,
        inv: Vec<ArrowId>,
        unit_arrow: Vec<ArrowId>,
    ) -> Result<Self, GroupoidError> {
        let n = arrows.len();
        let mut table = vec![None; n * n];
        for a in 0..n {
            for b in 0..n {
                table[a * n + b] = compose(a, b);
            }
        }
        Self::assemble(units, arrows, table, inv, unit_arrow)
    }

    fn assemble(
        units: Vec<String>,
        arrows: Vec<Arrow>,
        compose: Vec<Option<ArrowId>>,
        inv: Vec<ArrowId>,
        unit_arrow: Vec<ArrowId>,
    ) -> Result<Self, GroupoidError> {
        let mut unit_index = HashMap::new();
        for (i, u) in units.iter().enumerate() {
            if unit_index.insert(u.clone(), i).is_some() {
                return Err(GroupoidError::DuplicateUnit(u.clone()));
            }
        }
        let mut arrow_index = HashMap::new();
        for (i, a) in arrows.iter().enumerate() {
            if arrow_index.insert(a.id.clone(), i).is_some() {
                return Err(GroupoidError::DuplicateArrow(a.id.clone()));
            }
            if a.src >= units.len() || a.tgt >= units.len() {
                return Err(GroupoidError::UnknownUnit(format!(
                    "index for arrow {}",
                    a.id
                )));
            }
        }
        if inv.len() != arrows.len() {
            return Err(GroupoidError::MissingInverse(
                arrows
                    .get(inv.len())
                    .map(|a| a.id.clone())
                    .unwrap_or_default(),
            ));
        }
        if unit_arrow.len() != units.len() {
            return Err(GroupoidError::MissingUnitArrow(
                units.get(unit_arrow.len()).cloned().unwrap_or_default(),
            ));
        }
        Ok(Self {
            units,
            arrows,
            compose,
            inv,
            unit_arrow,
            unit_index,
            arrow_index,
        })
    }

    /// Build from named tables, as read from a description file.
    ///
    /// Unit arrows are taken from `unit_arrows` when given; otherwise the
    /// arrow carrying the unit's own id, otherwise the unique idempotent
    /// loop at that unit.
    pub fn from_named(
        units: &[String],
        arrows: &[(String, String, String)],
        compose: &[(String, String, String)],
        inv: &[(String, String)],
        unit_arrows: Option<&[(String, String)]>,
    ) -> Result<Self, GroupoidError> {
        let mut unit_index = HashMap::new();
        for (i, u) in units.iter().enumerate() {
            if unit_index.insert(u.clone(), i).is_some() {
                return Err(GroupoidError::DuplicateUnit(u.clone()));
            }
        }
        let lookup_unit = |u: &str| {
            unit_index
                .get(u)
                .copied()
                .ok_or_else(|| GroupoidError::UnknownUnit(u.to_string()))
        };
        let mut arr = Vec::with_capacity(arrows.len());
        let mut arrow_index = HashMap::new();
        for (id, s, t) in arrows {
            if arrow_index.insert(id.clone(), arr.len()).is_some() {
                return Err(GroupoidError::DuplicateArrow(id.clone()));
            }
            arr.push(Arrow {
                id: id.clone(),
                src: lookup_unit(s)?,
                tgt: lookup_unit(t)?,
            });
        }
        let lookup_arrow = |a: &str| {
            arrow_index
                .get(a)
                .copied()
                .ok_or_else(|| GroupoidError::UnknownArrow(a.to_string()))
        };
        let n = arr.len();
        let mut table = vec![None; n * n];
        for (a, b, ab) in compose {
            let (a, b, ab) = (lookup_arrow(a)?, lookup_arrow(b)?, lookup_arrow(ab)?);
            match table[a * n + b] {
                Some(prev) if prev != ab => {
                    return Err(GroupoidError::ConflictingCompose(
                        arr[a].id.clone(),
                        arr[b].id.clone(),
                    ))
                }
                _ => table[a * n + b] = Some(ab),
            }
        }
        let mut inverse = vec![None; n];
        for (a, b) in inv {
            let (a, b) = (lookup_arrow(a)?, lookup_arrow(b)?);
            inverse[a] = Some(b);
        }
        let inverse = inverse
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| GroupoidError::MissingInverse(arr[i].id.clone())))
            .collect::<Result<Vec<_>, _>>()?;

        let mut unit_arrow = vec![None; units.len()];
        if let Some(pairs) = unit_arrows {
            for (u, a) in pairs {
                unit_arrow[lookup_unit(u)?] = Some(lookup_arrow(a)?);
            }
        }
        for (x, name) in units.iter().enumerate() {
            if unit_arrow[x].is_some() {
                continue;
            }
            if let Some(&a) = arrow_index.get(name) {
                unit_arrow[x] = Some(a);
                continue;
            }
            let loops: Vec<ArrowId> = (0..n)
                .filter(|&a| arr[a].src == x && arr[a].tgt == x && table[a * n + a] == Some(a))
                .collect();
            if loops.len() == 1 {
                unit_arrow[x] = Some(loops[0]);
            }
        }
        let unit_arrow = unit_arrow
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| GroupoidError::MissingUnitArrow(units[i].clone())))
            .collect::<Result<Vec<_>, _>>()?;
        Self::assemble(units.to_vec(), arr, table, inverse, unit_arrow)
    }

    pub fn num_units(&self) -> usize {
        self.units.len()
    }

    pub fn num_arrows(&self) -> usize {
        self.arrows.len()
    }

    pub fn units(&self) -> impl Iterator<Item = UnitId> {
        0..self.units.len()
    }

    pub fn arrows(&self) -> impl Iterator<Item = ArrowId> {
        0..self.arrows.len()
    }

    pub fn unit_name(&self, x: UnitId) -> &str {
        &self.units[x]
    }

    pub fn unit_names(&self) -> &[String] {
        &self.units
    }

    pub fn arrow_name(&self, a: ArrowId) -> &str {
        &self.arrows[a].id
    }

    pub fn arrow_data(&self) -> &[Arrow] {
        &self.arrows
    }

    pub fn unit_by_name(&self, name: &str) -> Option<UnitId> {
        self.unit_index.get(name).copied()
    }

    pub fn arrow_by_name(&self, name: &str) -> Option<ArrowId> {
        self.arrow_index.get(name).copied()
    }

    pub fn src(&self, a: ArrowId) -> UnitId {
        self.arrows[a].src
    }

    pub fn tgt(&self, a: ArrowId) -> UnitId {
        self.arrows[a].tgt
    }

    pub fn compose(&self, a: ArrowId, b: ArrowId) -> Option<ArrowId> {
        self.compose[a * self.arrows.len() + b]
    }

    pub fn inv(&self, a: ArrowId) -> ArrowId {
        self.inv[a]
    }

    pub fn unit_arrow(&self, x: UnitId) -> ArrowId {
        self.unit_arrow[x]
    }

    pub fn is_unit_arrow(&self, a: ArrowId) -> bool {
        self.unit_arrow[self.tgt(a)] == a || self.unit_arrow[self.src(a)] == a
    }

    /// `G^x`: arrows with range `x`.
    pub fn range_fiber(&self, x: UnitId) -> Vec<ArrowId> {
        self.arrows().filter(|&a| self.tgt(a) == x).collect()
    }

    /// `G_x`: arrows with source `x`.
    pub fn source_fiber(&self, x: UnitId) -> Vec<ArrowId> {
        self.arrows().filter(|&a| self.src(a) == x).collect()
    }

    /// `G^x_x`.
    pub fn isotropy_arrows(&self, x: UnitId) -> Vec<ArrowId> {
        self.arrows()
            .filter(|&a| self.tgt(a) == x && self.src(a) == x)
            .collect()
    }

    pub fn is_principal(&self) -> bool {
        self.arrows()
            .all(|a| self.src(a) != self.tgt(a) || self.is_unit_arrow(a))
    }

    /// Orbits of the unit space, each sorted, ordered by smallest member.
    pub fn orbits(&self) -> Vec<Vec<UnitId>> {
        let mut parent: Vec<usize> = (0..self.num_units()).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let next = p[y];
                p[y] = r;
                y = next;
            }
            r
        }
        for a in self.arrows() {
            let (s, t) = (
                find(&mut parent, self.src(a)),
                find(&mut parent, self.tgt(a)),
            );
            if s != t {
                parent[s.max(t)] = s.min(t);
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<UnitId>> = Default::default();
        for x in self.units() {
            let r = find(&mut parent, x);
            groups.entry(r).or_default().push(x);
        }
        groups.into_values().collect()
    }

    /// Subgroupoid on the given arrows and units (closure is the caller's
    /// responsibility). Arrow and unit ids are shared with `self`.
    pub fn subgroupoid(&self, arrows: &[ArrowId], units: &[UnitId]) -> FiniteGroupoid {
        let unit_pos: HashMap<UnitId, usize> =
            units.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        let arrow_pos: HashMap<ArrowId, usize> =
            arrows.iter().enumerate().map(|(i, &a)| (a, i)).collect();
        let new_arrows = arrows
            .iter()
            .map(|&a| Arrow {
                id: self.arrows[a].id.clone(),
                src: unit_pos[&self.src(a)],
                tgt: unit_pos[&self.tgt(a)],
            })
            .collect();
        let inv = arrows
            .iter()
            .map(|&a| {
                arrow_pos
                    .get(&self.inv(a))
                    .copied()
                    .unwrap_or(arrow_pos[&a])
            })
            .collect();
        let unit_arrow = units
            .iter()
            .map(|&x| arrow_pos[&self.unit_arrow(x)])
            .collect();
        FiniteGroupoid::from_indexed(
            units.iter().map(|&u| self.units[u].clone()).collect(),
            new_arrows,
            |i, j| {
                self.compose(arrows[i], arrows[j])
                    .and_then(|ab| arrow_pos.get(&ab).copied())
            },
            inv,
            unit_arrow,
        )
        .expect("subgroupoid of consistent data")
    }

    /// Map from a subgroupoid's arrows to this groupoid's arrows by id.
    pub fn embed_arrows(&self, sub: &FiniteGroupoid) -> Option<Vec<ArrowId>> {
        sub.arrows()
            .map(|a| {
                let p = self.arrow_by_name(sub.arrow_name(a))?;
                let same = self.unit_name(self.src(p)) == sub.unit_name(sub.src(a))
                    && self.unit_name(self.tgt(p)) == sub.unit_name(sub.tgt(a));
                same.then_some(p)
            })
            .collect()
    }
}

/// Every violated groupoid axiom, with arrow witnesses.
pub fn validate_groupoid(g: &FiniteGroupoid) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let name = |a: ArrowId| g.arrow_name(a).to_string();
    for x in g.units() {
        let e = g.unit_arrow(x);
        if g.src(e) != x || g.tgt(e) != x {
            rep.push(
                Axiom::UnitArrow,
                vec![g.unit_name(x).to_string(), name(e)],
                "unit arrow does not start and end at its unit",
            );
        }
    }
    for a in g.arrows() {
        for b in g.arrows() {
            let composable = g.src(a) == g.tgt(b);
            match (composable, g.compose(a, b)) {
                (true, None) => rep.push(
                    Axiom::ComposableDomain,
                    vec![name(a), name(b)],
                    "composable pair has no product",
                ),
                (false, Some(_)) => rep.push(
                    Axiom::ComposableDomain,
                    vec![name(a), name(b)],
                    "product defined on non-composable pair",
                ),
                (true, Some(ab)) => {
                    if g.tgt(ab) != g.tgt(a) || g.src(ab) != g.src(b) {
                        rep.push(
                            Axiom::ComposeRangeSource,
                            vec![name(a), name(b), name(ab)],
                            "r(ab) != r(a) or s(ab) != s(b)",
                        );
                    }
                }
                (false, None) => {}
            }
        }
    }
    for a in g.arrows() {
        for b in g.arrows() {
            let Some(ab) = g.compose(a, b) else { continue };
            for c in g.arrows() {
                let Some(bc) = g.compose(b, c) else { continue };
                let left = g.compose(ab, c);
                let right = g.compose(a, bc);
                if left != right || left.is_none() {
                    rep.push(
                        Axiom::Associativity,
                        vec![name(a), name(b), name(c)],
                        "(ab)c != a(bc)",
                    );
                }
            }
        }
    }
    for a in g.arrows() {
        let er = g.unit_arrow(g.tgt(a));
        let es = g.unit_arrow(g.src(a));
        if g.compose(er, a) != Some(a) || g.compose(a, es) != Some(a) {
            rep.push(
                Axiom::Identity,
                vec![name(a)],
                "unit arrows do not act as identities",
            );
        }
        let ai = g.inv(a);
        if g.compose(a, ai) != Some(er) || g.compose(ai, a) != Some(es) {
            rep.push(
                Axiom::Inverse,
                vec![name(a), name(ai)],
                "a a^-1 != r-unit or a^-1 a != s-unit",
            );
        }
        if g.inv(ai) != a {
            rep.push(
                Axiom::InverseInvolution,
                vec![name(a), name(ai)],
                "inv(inv(a)) != a",
            );
        }
    }
    rep
}

/// `G^x_x` as a one-unit groupoid sharing arrow ids.
pub fn isotropy(g: &FiniteGroupoid, x: UnitId) -> Result<FiniteGroupoid, GroupoidError> {
    if x >= g.num_units() {
        return Err(GroupoidError::UnknownUnit(format!("#{x}")));
    }
    Ok(g.subgroupoid(&g.isotropy_arrows(x), &[x]))
}

/// Arrows with `r = s`, over the full unit set.
pub fn isotropy_bundle(g: &FiniteGroupoid) -> FiniteGroupoid {
    let arrows: Vec<ArrowId> = g.arrows().filter(|&a| g.src(a) == g.tgt(a)).collect();
    let units: Vec<UnitId> = g.units().collect();
    g.subgroupoid(&arrows, &units)
}

/// Real 1-cocycle, indexed by arrow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cocycle {
    pub values: Vec<f64>,
}

impl Cocycle {
    pub fn new(g: &FiniteGroupoid, values: Vec<f64>) -> Result<Self, GroupoidError> {
        if values.len() != g.num_arrows() {
            return Err(GroupoidError::CocycleLength {
                expected: g.num_arrows(),
                got: values.len(),
            });
        }
        Ok(Self { values })
    }

    pub fn from_fn(g: &FiniteGroupoid, f: impl Fn(ArrowId) -> f64) -> Self {
        Self {
            values: g.arrows().map(f).collect(),
        }
    }

    pub fn zero(g: &FiniteGroupoid) -> Self {
        Self::from_fn(g, |_| 0.0)
    }

    /// Coboundary `c(γ) = b(r(γ)) - b(s(γ))` of a potential on units.
    pub fn coboundary(g: &FiniteGroupoid, potential: &[f64]) -> Self {
        Self::from_fn(g, |a| potential[g.tgt(a)] - potential[g.src(a)])
    }

    pub fn at(&self, a: ArrowId) -> f64 {
        self.values[a]
    }

    /// `e^{-β c}` per arrow.
    pub fn modular(&self, beta: f64) -> Vec<f64> {
        self.values.iter().map(|c| (-beta * c).exp()).collect()
    }

    pub fn validate(&self, g: &FiniteGroupoid, tol: f64) -> ValidationReport {
        let mut rep = ValidationReport::default();
        for a in g.arrows() {
            for b in g.arrows() {
                if let Some(ab) = g.compose(a, b) {
                    let lhs = self.values[ab];
                    let rhs = self.values[a] + self.values[b];
                    if !approx_eq(lhs, rhs, tol) {
                        rep.push(
                            Axiom::CocycleAdditivity,
                            vec![g.arrow_name(a).into(), g.arrow_name(b).into()],
                            format!("c(ab) = {lhs} but c(a) + c(b) = {rhs}"),
                        );
                    }
                }
            }
        }
        rep
    }
}

/// Nonnegative weights on the unit space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitMeasure {
    pub weights: Vec<f64>,
}

impl UnitMeasure {
    pub fn new(g: &FiniteGroupoid, weights: Vec<f64>) -> Result<Self, GroupoidError> {
        if weights.len() != g.num_units() {
            return Err(GroupoidError::MeasureLength {
                expected: g.num_units(),
                got: weights.len(),
            });
        }
        if let Some((x, w)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0)) {
            return Err(GroupoidError::NegativeWeight {
                unit: g.unit_name(x).to_string(),
                weight: *w,
            });
        }
        Ok(Self { weights })
    }

    pub fn point_mass(g: &FiniteGroupoid, x: UnitId) -> Self {
        let mut weights = vec![0.0; g.num_units()];
        weights[x] = 1.0;
        Self { weights }
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_probability(&self, tol: f64) -> bool {
        approx_eq(self.total(), 1.0, tol)
    }

    pub fn at(&self, x: UnitId) -> f64 {
        self.weights[x]
    }

    /// Units carrying weight above `tol`.
    pub fn support(&self, tol: f64) -> Vec<UnitId> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > tol)
            .map(|(x, _)| x)
            .collect()
    }

    pub fn max_deviation(&self, other: &UnitMeasure) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiInvariance {
    pub holds: bool,
    pub witness: Option<ArrowId>,
    pub max_residual: f64,
}

/// Per-arrow quasi-invariance `μ(r(γ)) = Δ(γ) μ(s(γ))`.
pub fn check_quasi_invariant(
    g: &FiniteGroupoid,
    mu: &UnitMeasure,
    delta: &[f64],
    tol: f64,
) -> QuasiInvariance {
    let mut witness = None;
    let mut max_residual: f64 = 0.0;
    for a in g.arrows() {
        let lhs = mu.at(g.tgt(a));
        let rhs = delta[a] * mu.at(g.src(a));
        max_residual = max_residual.max((lhs - rhs).abs());
        if witness.is_none() && !approx_eq(lhs, rhs, tol) {
            witness = Some(a);
        }
    }
    QuasiInvariance {
        holds: witness.is_none(),
        witness,
        max_residual,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiInvariantSolution {
    /// One normalized measure per orbit on which the ratios are consistent.
    pub extreme_points: Vec<UnitMeasure>,
    /// Orbits forced to carry zero mass, with an arrow witnessing the
    /// inconsistency.
    pub obstructed: Vec<(Vec<UnitId>, ArrowId)>,
}

impl QuasiInvariantSolution {
    pub fn is_feasible(&self) -> bool {
        !self.extreme_points.is_empty()
    }
}

/// Extreme points of `{μ ≥ 0, Σμ = 1, μ(r(γ)) = e^{-βc(γ)} μ(s(γ))}`.
///
/// Ratios along an orbit are fixed by propagation from a root; the orbit
/// is obstructed when some arrow (necessarily closing a cycle) disagrees.
pub fn solve_quasi_invariant(
    g: &FiniteGroupoid,
    c: &Cocycle,
    beta: f64,
    tol: f64,
) -> QuasiInvariantSolution {
    let delta = c.modular(beta);
    let mut extreme_points = Vec::new();
    let mut obstructed = Vec::new();
    for orbit in g.orbits() {
        let members: BTreeSet<UnitId> = orbit.iter().copied().collect();
        let mut rel = vec![f64::NAN; g.num_units()];
        let root = orbit[0];
        rel[root] = 1.0;
        let mut queue = VecDeque::from([root]);
        while let Some(x) = queue.pop_front() {
            // arrows leaving x: r(γ) = Δ(γ) s(γ)
            for a in g.source_fiber(x) {
                let t = g.tgt(a);
                if rel[t].is_nan() {
                    rel[t] = delta[a] * rel[x];
                    queue.push_back(t);
                }
            }
            for a in g.range_fiber(x) {
                let s = g.src(a);
                if rel[s].is_nan() {
                    rel[s] = rel[x] / delta[a];
                    queue.push_back(s);
                }
            }
        }
        let bad = g.arrows().find(|&a| {
            members.contains(&g.src(a)) && !approx_eq(rel[g.tgt(a)], delta[a] * rel[g.src(a)], tol)
        });
        if let Some(a) = bad {
            obstructed.push((orbit, a));
            continue;
        }
        let total: f64 = orbit.iter().map(|&x| rel[x]).sum();
        let mut weights = vec![0.0; g.num_units()];
        for &x in &orbit {
            weights[x] = rel[x] / total;
        }
        extreme_points.push(UnitMeasure { weights });
    }
    QuasiInvariantSolution {
        extreme_points,
        obstructed,
    }
}

// ---------------------------------------------------------------------------
// builders

/// Pair groupoid `N × {*} × N` with units `(k,*)` and arrows `(h,*,k)`.
pub fn pair_groupoid(n: usize) -> FiniteGroupoid {
    crate::models::pair_model_groupoid(n, &["*".to_string()])
}

/// Cyclic group `Z/n` as a one-unit groupoid; arrows `e, g, g^2, ...`.
pub fn cyclic_group(n: usize) -> FiniteGroupoid {
    group_bundle(&[n], &["*".to_string()])
}

fn power_name(k: usize) -> String {
    match k {
        0 => "e".into(),
        1 => "g".into(),
        k => format!("g^{k}"),
    }
}

/// Bundle of cyclic groups `Z/orders[i]` over units `names[i]`.
/// Arrows are named `name:e`, `name:g`, ... (or bare `e`, `g` for a
/// single unit).
pub fn group_bundle(orders: &[usize], names: &[String]) -> FiniteGroupoid {
    assert_eq!(orders.len(), names.len());
    let single = orders.len() == 1;
    let mut arrows = Vec::new();
    let mut owner = Vec::new();
    let mut offset = Vec::new();
    for (x, &n) in orders.iter().enumerate() {
        offset.push(arrows.len());
        for k in 0..n {
            let id = if single {
                power_name(k)
            } else {
                format!("{}:{}", names[x], power_name(k))
            };
            arrows.push(Arrow { id, src: x, tgt: x });
            owner.push((x, k));
        }
    }
    let inv = owner
        .iter()
        .map(|&(x, k)| offset[x] + (orders[x] - k) % orders[x])
        .collect();
    let unit_arrow = offset.clone();
    FiniteGroupoid::from_indexed(
        names.to_vec(),
        arrows,
        |a, b| {
            let ((x, i), (y, j)) = (owner[a], owner[b]);
            (x == y).then(|| offset[x] + (i + j) % orders[x])
        },
        inv,
        unit_arrow,
    )
    .expect("group bundle tables are consistent")
}

/// Only unit arrows.
pub fn trivial_groupoid(names: &[String]) -> FiniteGroupoid {
    group_bundle(&vec![1; names.len()], names)
}

/// Product groupoid with units `(x,y)` and arrows `(a,b)`.
pub fn product(g: &FiniteGroupoid, h: &FiniteGroupoid) -> FiniteGroupoid {
    let nu = h.num_units();
    let na = h.num_arrows();
    let units = g
        .units()
        .flat_map(|x| h.units().map(move |y| (x, y)))
        .map(|(x, y)| format!("({},{})", g.unit_name(x), h.unit_name(y)))
        .collect();
    let arrows = g
        .arrows()
        .flat_map(|a| h.arrows().map(move |b| (a, b)))
        .map(|(a, b)| Arrow {
            id: format!("({},{})", g.arrow_name(a), h.arrow_name(b)),
            src: g.src(a) * nu + h.src(b),
            tgt: g.tgt(a) * nu + h.tgt(b),
        })
        .collect();
    let split = |p: ArrowId| (p / na, p % na);
    let inv = (0..g.num_arrows() * na)
        .map(|p| {
            let (a, b) = split(p);
            g.inv(a) * na + h.inv(b)
        })
        .collect();
    let unit_arrow = (0..g.num_units() * nu)
        .map(|u| g.unit_arrow(u / nu) * na + h.unit_arrow(u % nu))
        .collect();
    FiniteGroupoid::from_indexed(
        units,
        arrows,
        |p, q| {
            let ((a, b), (c, d)) = (split(p), split(q));
            Some(g.compose(a, c)? * na + h.compose(b, d)?)
        },
        inv,
        unit_arrow,
    )
    .expect("product of consistent groupoids")
}
