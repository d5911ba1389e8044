//! Scenario files: one JSON document describing a groupoid, a bundle, a
//! cocycle, inverse temperatures and optional state data.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use fellkms::conv::AlgebraModel;
use fellkms::fellbundle::{
    pullback_bundle, trivial_bundle, validate_bundle, FellBundle, Fiber, GroupoidAction,
    MatrixAlgebra,
};
use fellkms::groupoid::{
    cyclic_group, group_bundle, validate_groupoid, ArrowId, Cocycle, FiniteGroupoid, UnitId,
    UnitMeasure,
};
use fellkms::linalg::{CMat, C64};
use fellkms::models::{pair_model_groupoid, GSpace, GSpaceModels};
use fellkms::report::ValidationReport;
use fellkms::states::{State, StateField};

/// A malformed or inconsistent input file.
#[derive(Debug, Error)]
#[error("{file}: {location}: {message}")]
pub struct InputError {
    pub file: String,
    /// JSON path (or `line:column` for syntax errors).
    pub location: String,
    pub message: String,
}

type Res<T> = Result<T, (String, String)>;

fn err<T>(path: impl Into<String>, msg: impl Into<String>) -> Res<T> {
    Err((path.into(), msg.into()))
}

// ---------------------------------------------------------------------------
// raw file format

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum RawEntry {
    Real(f64),
    Complex([f64; 2]),
}

impl RawEntry {
    fn value(&self) -> C64 {
        match *self {
            RawEntry::Real(r) => C64::new(r, 0.0),
            RawEntry::Complex([re, im]) => C64::new(re, im),
        }
    }
}

/// Row-major matrix; entries are numbers or `[re, im]`.
pub type RawMatrix = Vec<Vec<RawEntry>>;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum RawAlgebra {
    /// `"scalars"`, `"full:d"` or `"diag:d"`.
    Short(String),
    Blocks {
        blocks: Vec<usize>,
    },
    Basis {
        dim: usize,
        basis: Vec<RawMatrix>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTables {
    pub units: Vec<String>,
    /// `[id, source, target]`.
    pub arrows: Vec<(String, String, String)>,
    /// `[γ, η, γη]`.
    pub compose: Vec<(String, String, String)>,
    /// `[γ, γ^{-1}]`.
    pub inverse: Vec<(String, String)>,
    #[serde(default)]
    pub unit_arrows: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPair {
    pub n: usize,
    #[serde(rename = "X")]
    pub points: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGroupBundle {
    pub orders: Vec<usize>,
    pub names: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RawGroupoid {
    Tables(RawTables),
    Pair(RawPair),
    Cyclic(usize),
    GroupBundle(RawGroupBundle),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGSpace {
    pub groupoid: RawGroupoid,
    pub points: Vec<String>,
    /// point → unit
    pub momentum: BTreeMap<String, String>,
    /// `[x, γ, x·γ]`
    pub action: Vec<(String, String, String)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPairModel {
    pub n: usize,
    #[serde(rename = "X")]
    pub points: Vec<String>,
    #[serde(rename = "A", default)]
    pub algebra: Option<RawAlgebra>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFiber {
    #[serde(default)]
    pub rows: Option<usize>,
    #[serde(default)]
    pub cols: Option<usize>,
    pub basis: Vec<RawMatrix>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RawBundle {
    Trivial {
        algebra: RawAlgebra,
    },
    Fibers {
        fibers: BTreeMap<String, RawFiber>,
    },
    Action {
        algebras: BTreeMap<String, RawAlgebra>,
        unitaries: BTreeMap<String, RawMatrix>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum RawCocycle {
    /// `"h_minus_k"` or `"zero"`.
    Named(String),
    /// Arrow → value; omitted arrows are 0.
    Table(BTreeMap<String, f64>),
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RawState {
    /// Arrow → density `W_γ`, with `φ(f) = Σ tr(W_γ^* f(γ))`.
    Densities(BTreeMap<String, RawMatrix>),
    /// `"arrow#i"` → `φ(b_i)` on the declared basis of `A_arrow`.
    BasisValues(BTreeMap<String, RawEntry>),
    /// Unit → weight of the normalised trace of the unit fibre.
    UnitTrace(BTreeMap<String, f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScenario {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub groupoid: Option<RawGroupoid>,
    #[serde(default)]
    pub pair_model: Option<RawPairModel>,
    #[serde(default)]
    pub gspace: Option<RawGSpace>,
    #[serde(default)]
    pub bundle: Option<RawBundle>,
    #[serde(default)]
    pub cocycle: Option<RawCocycle>,
    #[serde(default)]
    pub beta: Option<f64>,
    /// `[start, end, steps]`
    #[serde(default)]
    pub beta_range: Option<(f64, f64, usize)>,
    #[serde(default)]
    pub state: Option<RawState>,
    #[serde(default)]
    pub measure: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub field: Option<BTreeMap<String, RawState>>,
}

// ---------------------------------------------------------------------------
// resolved scenario

/// A resolved scenario. The bundle and everything depending on it are
/// only built when the groupoid passes validation.
#[derive(Debug)]
pub struct Scenario {
    pub name: String,
    /// Where the scenario came from, for error messages.
    pub file: String,
    pub groupoid: Arc<FiniteGroupoid>,
    pub groupoid_report: ValidationReport,
    pub built: Option<Built>,
    pub betas: Vec<f64>,
}

#[derive(Debug)]
pub struct Built {
    pub bundle: Arc<FellBundle>,
    pub action: Option<GroupoidAction>,
    pub cocycle: Cocycle,
    pub cocycle_report: ValidationReport,
    pub bundle_report: ValidationReport,
    /// `None` when the bundle fails validation.
    pub model: Option<AlgebraModel>,
    pub state: Option<State>,
    pub measure: Option<UnitMeasure>,
    pub field: Option<StateField>,
    /// Present for `gspace` scenarios; `model` is then `C*(X ⋊ G)`.
    pub gspace: Option<GSpaceModels>,
}

impl Scenario {
    pub fn load(path: &Path, tol: f64) -> Result<Self, InputError> {
        let file = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| InputError {
            file: file.clone(),
            location: "-".into(),
            message: e.to_string(),
        })?;
        Self::parse(&text, &file, tol)
    }

    pub fn parse(text: &str, file: &str, tol: f64) -> Result<Self, InputError> {
        let raw: RawScenario = serde_json::from_str(text).map_err(|e| InputError {
            file: file.to_string(),
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        resolve(raw, file, tol).map_err(|(location, message)| InputError {
            file: file.to_string(),
            location,
            message,
        })
    }

    pub fn model(&self) -> Option<&AlgebraModel> {
        self.built.as_ref().and_then(|b| b.model.as_ref())
    }
}

fn matrix(raw: &RawMatrix, path: &str) -> Res<CMat> {
    let rows = raw.len();
    let cols = raw.first().map_or(0, |r| r.len());
    if raw.iter().any(|r| r.len() != cols) {
        return err(path, "rows of unequal length");
    }
    Ok(CMat::from_fn(rows, cols, |i, j| raw[i][j].value()))
}

fn algebra(raw: &RawAlgebra, path: &str, tol: f64) -> Res<MatrixAlgebra> {
    match raw {
        RawAlgebra::Short(s) => {
            if s == "scalars" {
                return Ok(MatrixAlgebra::scalars());
            }
            let parsed = s
                .split_once(':')
                .and_then(|(k, d)| Some((k, d.parse::<usize>().ok()?)));
            match parsed {
                Some(("full", d)) if d > 0 => Ok(MatrixAlgebra::full(d)),
                Some(("diag", d)) if d > 0 => Ok(MatrixAlgebra::diagonal(d)),
                _ => err(
                    path,
                    format!("unknown algebra `{s}` (expected scalars, full:d or diag:d)"),
                ),
            }
        }
        RawAlgebra::Blocks { blocks } if !blocks.is_empty() && blocks.iter().all(|&b| b > 0) => {
            Ok(MatrixAlgebra::blocks(blocks))
        }
        RawAlgebra::Blocks { .. } => err(path, "blocks must be positive"),
        RawAlgebra::Basis { dim, basis } => {
            let mats = basis
                .iter()
                .enumerate()
                .map(|(i, m)| matrix(m, &format!("{path}.basis[{i}]")))
                .collect::<Res<Vec<_>>>()?;
            MatrixAlgebra::from_basis(*dim, mats, tol).or_else(|e| err(path, e.to_string()))
        }
    }
}

fn groupoid(raw: &RawGroupoid, path: &str) -> Res<FiniteGroupoid> {
    match raw {
        RawGroupoid::Tables(t) => {
            let unit_arrows: Option<Vec<(String, String)>> = t
                .unit_arrows
                .as_ref()
                .map(|m| m.iter().map(|(u, a)| (u.clone(), a.clone())).collect());
            FiniteGroupoid::from_named(
                &t.units,
                &t.arrows,
                &t.compose,
                &t.inverse,
                unit_arrows.as_deref(),
            )
            .or_else(|e| err(format!("{path}.tables"), e.to_string()))
        }
        RawGroupoid::Pair(p) if p.n > 0 && !p.points.is_empty() => {
            Ok(pair_model_groupoid(p.n, &p.points))
        }
        RawGroupoid::Pair(_) => err(format!("{path}.pair"), "needs n >= 1 and nonempty X"),
        RawGroupoid::Cyclic(n) if *n > 0 => Ok(cyclic_group(*n)),
        RawGroupoid::Cyclic(_) => err(format!("{path}.cyclic"), "order must be positive"),
        RawGroupoid::GroupBundle(b)
            if b.orders.len() == b.names.len() && b.orders.iter().all(|&o| o > 0) =>
        {
            Ok(group_bundle(&b.orders, &b.names))
        }
        RawGroupoid::GroupBundle(_) => err(
            format!("{path}.group_bundle"),
            "orders and names must match",
        ),
    }
}

fn gspace(raw: &RawGSpace) -> Res<GSpace> {
    let g = groupoid(&raw.groupoid, "gspace.groupoid")?;
    let report = validate_groupoid(&g);
    if !report.is_empty() {
        return err("gspace.groupoid", format!("invalid groupoid: {report:?}"));
    }
    let point = |p: &str, path: &str| {
        raw.points
            .iter()
            .position(|q| q == p)
            .ok_or_else(|| (path.to_string(), format!("unknown point `{p}`")))
    };
    let mut momentum = vec![None; raw.points.len()];
    for (p, u) in &raw.momentum {
        let path = format!("gspace.momentum.{p}");
        let x = point(p, &path)?;
        momentum[x] = Some(
            g.unit_by_name(u)
                .ok_or_else(|| (path.clone(), format!("unknown unit `{u}`")))?,
        );
    }
    let momentum = momentum
        .into_iter()
        .enumerate()
        .map(|(x, m)| {
            m.ok_or_else(|| {
                (
                    "gspace.momentum".to_string(),
                    format!("no momentum for `{}`", raw.points[x]),
                )
            })
        })
        .collect::<Res<Vec<_>>>()?;
    let mut table = BTreeMap::new();
    for (i, (x, a, y)) in raw.action.iter().enumerate() {
        let path = format!("gspace.action[{i}]");
        let arrow = g
            .arrow_by_name(a)
            .ok_or_else(|| (path.clone(), format!("unknown arrow `{a}`")))?;
        table.insert((point(x, &path)?, arrow), point(y, &path)?);
    }
    GSpace::new(Arc::new(g), raw.points.clone(), momentum, table)
        .or_else(|e| err("gspace.action", e.to_string()))
}

fn arrow(g: &FiniteGroupoid, name: &str, path: &str) -> Res<ArrowId> {
    g.arrow_by_name(name)
        .ok_or_else(|| (path.to_string(), format!("unknown arrow `{name}`")))
}

fn unit(g: &FiniteGroupoid, name: &str, path: &str) -> Res<UnitId> {
    g.unit_by_name(name)
        .ok_or_else(|| (path.to_string(), format!("unknown unit `{name}`")))
}

fn bundle(
    raw: &RawBundle,
    g: &Arc<FiniteGroupoid>,
    tol: f64,
) -> Res<(FellBundle, Option<GroupoidAction>)> {
    match raw {
        RawBundle::Trivial { algebra: a } => Ok((
            trivial_bundle(g.clone(), &algebra(a, "bundle.algebra", tol)?),
            None,
        )),
        RawBundle::Fibers { fibers } => {
            let mut out: Vec<Option<Fiber>> = vec![None; g.num_arrows()];
            for (name, f) in fibers {
                let path = format!("bundle.fibers.{name}");
                let a = arrow(g, name, &path)?;
                let basis = f
                    .basis
                    .iter()
                    .enumerate()
                    .map(|(i, m)| matrix(m, &format!("{path}.basis[{i}]")))
                    .collect::<Res<Vec<_>>>()?;
                let rows = f.rows.or(basis.first().map(|m| m.nrows()));
                let cols = f.cols.or(basis.first().map(|m| m.ncols()));
                let (Some(rows), Some(cols)) = (rows, cols) else {
                    return err(path, "empty basis needs explicit rows and cols");
                };
                if basis.iter().any(|m| m.shape() != (rows, cols)) {
                    return err(path, format!("basis elements must be {rows}×{cols}"));
                }
                out[a] = Some(Fiber::new(rows, cols, basis));
            }
            let fibers = out
                .into_iter()
                .enumerate()
                .map(|(a, f)| {
                    f.ok_or_else(|| {
                        (
                            "bundle.fibers".to_string(),
                            format!("missing fiber over `{}`", g.arrow_name(a)),
                        )
                    })
                })
                .collect::<Res<Vec<_>>>()?;
            let b = FellBundle::new(g.clone(), fibers)
                .or_else(|e| err("bundle.fibers", e.to_string()))?;
            Ok((b, None))
        }
        RawBundle::Action {
            algebras,
            unitaries,
        } => {
            let mut algs = vec![None; g.num_units()];
            for (u, a) in algebras {
                let path = format!("bundle.algebras.{u}");
                algs[unit(g, u, &path)?] = Some(algebra(a, &path, tol)?);
            }
            let algs = algs
                .into_iter()
                .enumerate()
                .map(|(x, a)| {
                    a.ok_or_else(|| {
                        (
                            "bundle.algebras".to_string(),
                            format!("missing algebra at `{}`", g.unit_name(x)),
                        )
                    })
                })
                .collect::<Res<Vec<_>>>()?;
            let mut us = vec![None; g.num_arrows()];
            for (name, m) in unitaries {
                let path = format!("bundle.unitaries.{name}");
                us[arrow(g, name, &path)?] = Some(matrix(m, &path)?);
            }
            let us = us
                .into_iter()
                .enumerate()
                .map(|(a, u)| {
                    u.or_else(|| {
                        // unit arrows default to the identity
                        g.is_unit_arrow(a).then(|| {
                            CMat::identity(
                                algs[g.src(a)].ambient_dim(),
                                algs[g.src(a)].ambient_dim(),
                            )
                        })
                    })
                    .ok_or_else(|| {
                        (
                            "bundle.unitaries".to_string(),
                            format!("missing unitary for `{}`", g.arrow_name(a)),
                        )
                    })
                })
                .collect::<Res<Vec<_>>>()?;
            let act = GroupoidAction::new(g.clone(), algs, us)
                .or_else(|e| err("bundle", e.to_string()))?;
            let b = pullback_bundle(&act).or_else(|e| err("bundle", e.to_string()))?;
            Ok((b, Some(act)))
        }
    }
}

/// `c(h, x, k) = h − k` read off arrow names of the form `(h,x,k)`.
fn h_minus_k(g: &FiniteGroupoid) -> Res<Cocycle> {
    let mut values = Vec::with_capacity(g.num_arrows());
    for a in g.arrows() {
        let name = g.arrow_name(a);
        let inner = name.strip_prefix('(').and_then(|s| s.strip_suffix(')'));
        let parts: Option<Vec<&str>> = inner.map(|s| s.split(',').collect());
        let hk = parts.and_then(|p| {
            let h = p.first()?.trim().parse::<f64>().ok()?;
            let k = p.last()?.trim().parse::<f64>().ok()?;
            (p.len() >= 2).then_some(h - k)
        });
        match hk {
            Some(v) => values.push(v),
            None => {
                return err(
                    "cocycle",
                    format!("h_minus_k needs arrows named (h,x,k); found `{name}`"),
                )
            }
        }
    }
    Cocycle::new(g, values).or_else(|e| err("cocycle", e.to_string()))
}

fn cocycle(raw: Option<&RawCocycle>, g: &FiniteGroupoid) -> Res<Cocycle> {
    match raw {
        None => Ok(Cocycle::zero(g)),
        Some(RawCocycle::Named(s)) if s == "zero" => Ok(Cocycle::zero(g)),
        Some(RawCocycle::Named(s)) if s == "h_minus_k" => h_minus_k(g),
        Some(RawCocycle::Named(s)) => err("cocycle", format!("unknown cocycle `{s}`")),
        Some(RawCocycle::Table(t)) => {
            let mut v = vec![0.0; g.num_arrows()];
            for (name, &c) in t {
                let path = format!("cocycle.{name}");
                if !c.is_finite() {
                    return err(path, "value must be finite");
                }
                v[arrow(g, name, &path)?] = c;
            }
            Cocycle::new(g, v).or_else(|e| err("cocycle", e.to_string()))
        }
    }
}

/// Reads a state on `model`. Arrow names are those of `ambient`, mapped
/// through `local` (identity for the full algebra).
fn state(
    raw: &RawState,
    model: &AlgebraModel,
    ambient: &FiniteGroupoid,
    local: &dyn Fn(ArrowId) -> Option<ArrowId>,
    path: &str,
) -> Res<State> {
    let b = model.bundle();
    let resolve = |name: &str, p: &str| -> Res<ArrowId> {
        let a = arrow(ambient, name, p)?;
        local(a).ok_or_else(|| {
            (
                p.to_string(),
                format!("arrow `{name}` is outside this algebra"),
            )
        })
    };
    match raw {
        RawState::Densities(d) => {
            let mut items = Vec::new();
            for (name, m) in d {
                let p = format!("{path}.densities.{name}");
                let a = resolve(name, &p)?;
                let w = matrix(m, &p)?;
                if w.shape() != b.shape(a) {
                    return err(p, format!("density must be {:?}", b.shape(a)));
                }
                items.push((a, w));
            }
            Ok(State::from_densities(model, items))
        }
        RawState::BasisValues(v) => {
            let mut values = vec![C64::new(0.0, 0.0); model.basis().len()];
            for (key, e) in v {
                let p = format!("{path}.basis_values.{key}");
                let Some((name, idx)) = key.rsplit_once('#') else {
                    return err(p, "keys are `arrow#index`");
                };
                let a = resolve(name, &p)?;
                let i: usize = idx.parse().or_else(|_| err(&p, "bad index"))?;
                if i >= b.fiber(a).basis().len() {
                    return err(p, "basis index out of range");
                }
                values[model.basis_index(a, i)] = e.value();
            }
            Ok(State::from_basis_values(model, &values))
        }
        RawState::UnitTrace(w) => {
            let g = b.groupoid();
            let mut weights = vec![0.0; g.num_units()];
            for (name, &v) in w {
                let p = format!("{path}.unit_trace.{name}");
                let x = unit(ambient, name, &p)?;
                let a = local(ambient.unit_arrow(x))
                    .ok_or_else(|| (p.clone(), "unit outside this algebra".to_string()))?;
                weights[g.src(a)] = v;
            }
            Ok(State::unit_trace(model, &weights))
        }
    }
}

fn resolve(raw: RawScenario, file: &str, tol: f64) -> Res<Scenario> {
    let sources = [
        raw.groupoid.is_some(),
        raw.pair_model.is_some(),
        raw.gspace.is_some(),
    ];
    if sources.iter().filter(|&&s| s).count() != 1 {
        return err(
            "$",
            "give exactly one of `groupoid`, `pair_model`, `gspace`",
        );
    }
    let mut implied_bundle: Option<RawBundle> = None;
    let mut gspace_models = None;
    let g = if let Some(pm) = &raw.pair_model {
        if pm.n == 0 || pm.points.is_empty() {
            return err("pair_model", "needs n >= 1 and nonempty X");
        }
        implied_bundle = Some(RawBundle::Trivial {
            algebra: match &pm.algebra {
                Some(RawAlgebra::Short(s)) => RawAlgebra::Short(s.clone()),
                Some(RawAlgebra::Blocks { blocks }) => RawAlgebra::Blocks {
                    blocks: blocks.clone(),
                },
                Some(RawAlgebra::Basis { .. }) => {
                    return err("pair_model.A", "use a named algebra here")
                }
                None => RawAlgebra::Short("scalars".into()),
            },
        });
        Arc::new(pair_model_groupoid(pm.n, &pm.points))
    } else if let Some(gs) = &raw.gspace {
        let models =
            GSpaceModels::new(gspace(gs)?, tol).or_else(|e| err("gspace", e.to_string()))?;
        let g = models.transformation.groupoid.clone();
        gspace_models = Some(models);
        g
    } else {
        Arc::new(groupoid(raw.groupoid.as_ref().unwrap(), "groupoid")?)
    };
    if (implied_bundle.is_some() || gspace_models.is_some()) && raw.bundle.is_some() {
        return err(
            "bundle",
            "the pair_model and gspace shorthands fix the bundle",
        );
    }
    let groupoid_report = validate_groupoid(&g);

    let mut betas = Vec::new();
    match (raw.beta, raw.beta_range) {
        (Some(_), Some(_)) => return err("beta", "give beta or beta_range, not both"),
        (Some(b), None) if b.is_finite() => betas.push(b),
        (Some(_), None) => return err("beta", "β must be finite"),
        (None, Some((a, b, n))) => {
            betas = beta_sweep(a, b, n).map_err(|m| ("beta_range".to_string(), m))?
        }
        (None, None) => {}
    }
    let name = raw.name.clone().unwrap_or_else(|| "scenario".into());
    if !groupoid_report.is_empty() {
        return Ok(Scenario {
            name,
            file: file.to_string(),
            groupoid: g,
            groupoid_report,
            built: None,
            betas,
        });
    }

    let (b, action) = match &gspace_models {
        Some(m) => ((*m.crossed.bundle_arc()).clone(), None),
        None => {
            let raw_bundle = implied_bundle
                .as_ref()
                .or(raw.bundle.as_ref())
                .ok_or_else(|| ("bundle".to_string(), "missing bundle".to_string()))?;
            bundle(raw_bundle, &g, tol)?
        }
    };
    let bundle_report = validate_bundle(&b, tol);
    let c = cocycle(raw.cocycle.as_ref(), &g)?;
    let cocycle_report = c.validate(&g, tol);
    let b = Arc::new(b);
    let model = if bundle_report.is_empty() {
        Some(AlgebraModel::new(b.clone(), tol).or_else(|e| err("bundle", e.to_string()))?)
    } else {
        None
    };
    let mut built = Built {
        bundle: b,
        action,
        cocycle: c,
        cocycle_report,
        bundle_report,
        model,
        state: None,
        measure: None,
        field: None,
        gspace: gspace_models,
    };
    if let Some(m) = &built.model {
        if let Some(s) = &raw.state {
            built.state = Some(state(s, m, &g, &|a| Some(a), "state")?);
        }
        if let Some(w) = &raw.measure {
            let mut weights = vec![0.0; g.num_units()];
            for (u, &v) in w {
                weights[unit(&g, u, &format!("measure.{u}"))?] = v;
            }
            built.measure =
                Some(UnitMeasure::new(&g, weights).or_else(|e| err("measure", e.to_string()))?);
        }
        if let Some(f) = &raw.field {
            let mut field = StateField::new();
            for (u, s) in f {
                let path = format!("field.{u}");
                let x = unit(&g, u, &path)?;
                let iso = m.isotropy(x);
                let st = state(s, &iso.model, &g, &|a| iso.local(a), &path)?;
                field.insert(x, st);
            }
            built.field = Some(field);
        }
    }
    Ok(Scenario {
        name,
        file: file.to_string(),
        groupoid: g,
        groupoid_report,
        built: Some(built),
        betas,
    })
}

/// `steps` evenly spaced values from `a` to `b` inclusive.
pub fn beta_sweep(a: f64, b: f64, steps: usize) -> Result<Vec<f64>, String> {
    if !a.is_finite() || !b.is_finite() {
        return Err("β must be finite".into());
    }
    match steps {
        0 => Err("steps must be positive".into()),
        1 => Ok(vec![a]),
        n => Ok((0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect()),
    }
}
