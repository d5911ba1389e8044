//! Axiom-violation reports produced by the validators.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Axioms checked by the groupoid, cocycle and Fell-bundle validators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    // groupoid
    ComposableDomain,
    ComposeRangeSource,
    Associativity,
    UnitArrow,
    Identity,
    Inverse,
    InverseInvolution,
    // cocycle
    CocycleAdditivity,
    // Fell bundle
    FiberShape,
    BasisIndependence,
    /// Axioms (1)–(4): `A_γ A_η ⊆ A_{γη}`.
    Multiplication,
    /// Axioms (5)–(8): `A_γ^* = A_{γ^{-1}}`.
    Involution,
    /// Unit fibres are unital *-algebras.
    UnitFiberAlgebra,
    /// Axiom (9): `‖a^* a‖ = ‖a‖²`.
    CStarIdentity,
    /// Axiom (10): `a^* a ≥ 0` in `A_{s(γ)}`.
    Positivity,
    Saturation,
    // groupoid action
    ActionUnitary,
    ActionCocycle,
    ActionCovariance,
    ActionUnit,
}

impl Axiom {
    pub fn name(self) -> &'static str {
        match self {
            Axiom::ComposableDomain => "composable-domain",
            Axiom::ComposeRangeSource => "compose-range-source",
            Axiom::Associativity => "associativity",
            Axiom::UnitArrow => "unit-arrow",
            Axiom::Identity => "identity",
            Axiom::Inverse => "inverse",
            Axiom::InverseInvolution => "inverse-involution",
            Axiom::CocycleAdditivity => "cocycle-additivity",
            Axiom::FiberShape => "fiber-shape",
            Axiom::BasisIndependence => "basis-independence",
            Axiom::Multiplication => "multiplication (1)-(4)",
            Axiom::Involution => "involution (5)-(8)",
            Axiom::UnitFiberAlgebra => "unit-fiber-algebra",
            Axiom::CStarIdentity => "c-star-identity (9)",
            Axiom::Positivity => "positivity (10)",
            Axiom::Saturation => "saturation",
            Axiom::ActionUnitary => "action-unitary",
            Axiom::ActionCocycle => "action-cocycle",
            Axiom::ActionCovariance => "action-covariance",
            Axiom::ActionUnit => "action-unit",
        }
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub axiom: Axiom,
    /// Arrow ids (and basis indices where relevant) exhibiting the failure.
    pub witness: Vec<String>,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, axiom: Axiom, witness: Vec<String>, detail: impl Into<String>) {
        self.violations.push(Violation {
            axiom,
            witness,
            detail: detail.into(),
        });
    }

    pub fn cites(&self, axiom: Axiom) -> bool {
        self.violations.iter().any(|v| v.axiom == axiom)
    }

    /// Distinct axioms cited, in first-seen order.
    pub fn axioms(&self) -> Vec<Axiom> {
        let mut out = Vec::new();
        for v in &self.violations {
            if !out.contains(&v.axiom) {
                out.push(v.axiom);
            }
        }
        out
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }
}

/// Outcome of a numerical identity check over a finite grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub holds: bool,
    /// Largest absolute residual seen.
    pub max_residual: f64,
    /// First failing grid point, if any.
    pub witness: Option<Vec<String>>,
}

impl Check {
    pub fn pass() -> Self {
        Self {
            holds: true,
            max_residual: 0.0,
            witness: None,
        }
    }

    /// Record one comparison; `ok` decides pass/fail at the caller's tolerance.
    pub fn record(&mut self, residual: f64, ok: bool, witness: impl FnOnce() -> Vec<String>) {
        if residual > self.max_residual || residual.is_nan() {
            self.max_residual = residual;
        }
        if !ok && self.holds {
            self.holds = false;
            self.witness = Some(witness());
        }
    }

    pub fn merge(&mut self, other: Check) {
        self.max_residual = self.max_residual.max(other.max_residual);
        if !other.holds && self.holds {
            self.holds = false;
            self.witness = other.witness;
        }
    }
}
