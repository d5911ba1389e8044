//! The four subcommands. Each returns a JSON report, a text table and an
//! exit status; malformed requests surface as [`InputError`].

use serde_json::{json, Map, Value};

use fellkms::conv::AlgebraModel;
use fellkms::kms::{is_kms, pair_from_kms, solve_kms, Dynamics, SolveOptions};
use fellkms::models::{gspace_double_disintegrate, reconstruction_residual};
use fellkms::report::Check;
use fellkms::states::{decompose_c0x_state, disintegrate, integrate};

use crate::report::{self, Row};
use crate::scenario::{Built, InputError, Scenario};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
        }
    }

    fn from(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    fn name(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub status: Status,
    pub json: Value,
    pub text: String,
}

#[derive(Clone, Debug)]
pub struct Options {
    pub tol: f64,
    /// Replaces the scenario's β values when given.
    pub betas: Option<Vec<f64>>,
}

fn input_error(scenario: &Scenario, location: &str, message: &str) -> InputError {
    InputError {
        file: scenario.file.clone(),
        location: location.into(),
        message: message.into(),
    }
}

fn envelope(
    command: &str,
    scenario: &Scenario,
    opts: &Options,
    status: Status,
    body: Map<String, Value>,
) -> Value {
    let mut out = body;
    out.insert("command".into(), json!(command));
    out.insert("scenario".into(), json!(scenario.name));
    out.insert("tol".into(), json!(opts.tol));
    out.insert("status".into(), json!(status.name()));
    Value::Object(out)
}

/// Early exit shared by the commands that need a valid algebra.
fn invalid_structure(command: &str, scenario: &Scenario, opts: &Options) -> Option<Outcome> {
    if scenario.model().is_some() {
        return None;
    }
    let mut body = Map::new();
    body.insert(
        "groupoid".into(),
        report::violations(&scenario.groupoid_report),
    );
    if let Some(b) = &scenario.built {
        body.insert("bundle".into(), report::violations(&b.bundle_report));
    }
    let text = format!(
        "{}: {command} skipped, the groupoid or bundle fails validation (run `validate`)\n",
        scenario.name
    );
    Some(Outcome {
        status: Status::Fail,
        json: envelope(command, scenario, opts, Status::Fail, body),
        text,
    })
}

fn betas(scenario: &Scenario, opts: &Options) -> Result<Vec<f64>, InputError> {
    let b = opts.betas.clone().unwrap_or_else(|| scenario.betas.clone());
    if b.is_empty() {
        return Err(input_error(
            scenario,
            "beta",
            "no inverse temperature: set `beta`/`beta_range` or pass --beta",
        ));
    }
    if b.iter().any(|x| !x.is_finite()) {
        return Err(input_error(scenario, "beta", "β must be finite"));
    }
    Ok(b)
}

fn violation_rows(label: &str, r: &fellkms::report::ValidationReport) -> Vec<Row> {
    if r.is_empty() {
        return vec![Row::new(label, true, 0.0, "")];
    }
    r.violations
        .iter()
        .map(|v| {
            Row::new(
                format!("{label}: {}", v.axiom.name()),
                false,
                f64::NAN,
                v.witness.join(" "),
            )
        })
        .collect()
}

pub fn cmd_validate(scenario: &Scenario, opts: &Options) -> Outcome {
    let mut body = Map::new();
    let mut rows = violation_rows("groupoid", &scenario.groupoid_report);
    body.insert(
        "groupoid".into(),
        report::violations(&scenario.groupoid_report),
    );
    let mut ok = scenario.groupoid_report.is_empty();
    if let Some(b) = &scenario.built {
        body.insert("cocycle".into(), report::violations(&b.cocycle_report));
        body.insert("bundle".into(), report::violations(&b.bundle_report));
        rows.extend(violation_rows("cocycle", &b.cocycle_report));
        rows.extend(violation_rows("bundle", &b.bundle_report));
        ok &= b.cocycle_report.is_empty() && b.bundle_report.is_empty();
        if let Some(act) = &b.action {
            let r = act.validate(opts.tol);
            rows.extend(violation_rows("action", &r));
            ok &= r.is_empty();
            body.insert("action".into(), report::violations(&r));
        }
        if let Some(m) = &b.model {
            body.insert(
                "algebra".into(),
                json!({
                    "dimension": m.dim(),
                    "faithful_regular_representation": m.is_faithful(),
                }),
            );
        }
    }
    let status = Status::from(ok);
    Outcome {
        status,
        json: envelope("validate", scenario, opts, status, body),
        text: report::table(&format!("{}: validate", scenario.name), &rows),
    }
}

fn certificate_rows(beta: f64, cert: &fellkms::kms::KmsCertificate) -> Vec<Row> {
    let st = &cert.state;
    let mut rows = vec![
        Row::new(
            format!("β={beta} positivity"),
            st.positive,
            (-st.min_eigenvalue).max(0.0),
            format!("min eigenvalue {:.6e}", st.min_eigenvalue),
        ),
        Row::new(
            format!("β={beta} normalization"),
            st.normalized,
            (st.value_at_unit[0] - 1.0).hypot(st.value_at_unit[1]),
            "",
        ),
        Row::from_check(format!("β={beta} KMS"), &cert.kms),
    ];
    if let Some(c) = &cert.condition_i {
        rows.push(Row::from_check(format!("β={beta} condition I"), c));
    }
    if let Some(c) = &cert.condition_ii {
        rows.push(Row::from_check(format!("β={beta} condition II"), c));
    }
    rows
}

fn built(scenario: &Scenario) -> (&Built, &AlgebraModel) {
    let b = scenario
        .built
        .as_ref()
        .expect("checked by invalid_structure");
    (b, b.model.as_ref().expect("checked by invalid_structure"))
}

pub fn cmd_check_kms(scenario: &Scenario, opts: &Options) -> Result<Outcome, InputError> {
    if let Some(o) = invalid_structure("check-kms", scenario, opts) {
        return Ok(o);
    }
    let (b, model) = built(scenario);
    let phi = b
        .state
        .as_ref()
        .ok_or_else(|| input_error(scenario, "state", "check-kms needs a `state`"))?;
    let g = model.bundle().groupoid();
    let dynamics = Dynamics::new(b.cocycle.clone());
    let mut rows = Vec::new();
    let mut results = Vec::new();
    let mut ok = true;
    for beta in betas(scenario, opts)? {
        let cert = is_kms(model, phi, &dynamics, beta, opts.tol);
        let mut entry = Map::new();
        entry.insert("beta".into(), json!(beta));
        entry.insert("trace".into(), json!(cert.state.trace));
        let cert = if cert.pass {
            match pair_from_kms(model, phi, &dynamics, beta, opts.tol) {
                Ok(pair) => {
                    let d = &pair.disintegration;
                    entry.insert("mu".into(), report::measure(g, &d.mu));
                    entry.insert("field".into(), report::field(model, &d.field));
                    pair.certificate
                }
                Err(e) => {
                    entry.insert("disintegration_error".into(), json!(e.to_string()));
                    rows.push(Row::new(
                        format!("β={beta} disintegration"),
                        false,
                        f64::NAN,
                        e.to_string(),
                    ));
                    cert
                }
            }
        } else {
            cert
        };
        if cert.pass {
            if let Some(gm) = &b.gspace {
                match gspace_double_disintegrate(gm, phi, &b.cocycle, beta, opts.tol) {
                    Ok(t) => {
                        let residual = reconstruction_residual(gm, phi, &t);
                        let pts = gm.space.points();
                        let nu: Map<String, Value> =
                            t.nu.iter()
                                .map(|(&x, &v)| (pts[x].clone(), json!(v)))
                                .collect();
                        let gg = gm.space.groupoid();
                        let tau: Map<String, Value> = t
                            .tau
                            .iter()
                            .map(|(&x, m)| {
                                let inner: Map<String, Value> = m
                                    .iter()
                                    .map(|(&a, v)| (gg.arrow_name(a).to_string(), json!(v)))
                                    .collect();
                                (pts[x].clone(), Value::Object(inner))
                            })
                            .collect();
                        entry.insert(
                            "gspace".into(),
                            json!({
                                "mu": report::measure(gg, &t.mu),
                                "nu": nu,
                                "tau": tau,
                                "mu_condition_i": t.mu_condition_i.as_ref().map(report::check),
                                "joint_condition_i": report::check(&t.joint_condition_i),
                                "reconstruction_residual": residual,
                            }),
                        );
                        rows.push(Row::from_check(
                            format!("β={beta} G-space condition I"),
                            &t.joint_condition_i,
                        ));
                        rows.push(Row::new(
                            format!("β={beta} G-space reconstruction"),
                            residual <= opts.tol,
                            residual,
                            "",
                        ));
                    }
                    Err(e) => {
                        rows.push(Row::new(
                            format!("β={beta} G-space"),
                            false,
                            f64::NAN,
                            e.to_string(),
                        ));
                        entry.insert("gspace_error".into(), json!(e.to_string()));
                    }
                }
            }
        }
        rows.extend(certificate_rows(beta, &cert));
        ok &= cert.pass;
        entry.insert(
            "certificate".into(),
            serde_json::to_value(&cert).expect("certificate serializes"),
        );
        results.push(Value::Object(entry));
    }
    let status = Status::from(ok);
    let mut body = Map::new();
    body.insert("results".into(), Value::Array(results));
    Ok(Outcome {
        status,
        json: envelope("check-kms", scenario, opts, status, body),
        text: report::table(&format!("{}: check-kms", scenario.name), &rows),
    })
}

pub fn cmd_solve(scenario: &Scenario, opts: &Options) -> Result<Outcome, InputError> {
    if let Some(o) = invalid_structure("solve", scenario, opts) {
        return Ok(o);
    }
    let (b, model) = built(scenario);
    let g = model.bundle().groupoid();
    let dynamics = Dynamics::new(b.cocycle.clone());
    let solve_opts = SolveOptions {
        tol: opts.tol,
        ..SolveOptions::default()
    };
    let mut results = Vec::new();
    let mut text = format!("{}: solve\n", scenario.name);
    for beta in betas(scenario, opts)? {
        let sol = solve_kms(model, &dynamics, beta, solve_opts);
        let candidates: Vec<Value> = sol
            .candidates
            .iter()
            .map(|c| {
                json!({
                    "mu": report::measure(g, &c.mu),
                    "field": report::field(model, &c.field),
                    "state": report::state(g, &c.state, &|a| a),
                    "certificate": serde_json::to_value(&c.certificate).expect("certificate serializes"),
                    "iterations": c.iterations,
                })
            })
            .collect();
        text.push_str(&format!(
            "  β={beta}: {} candidate(s)\n",
            sol.candidates.len()
        ));
        for (i, c) in sol.candidates.iter().enumerate() {
            let mu: Vec<String> = g
                .units()
                .map(|x| format!("{}={:.6}", g.unit_name(x), c.mu.at(x)))
                .collect();
            text.push_str(&format!(
                "    #{i} μ: {}  KMS residual {:.3e}\n",
                mu.join(" "),
                c.certificate.kms.max_residual
            ));
        }
        for d in &sol.diagnosis {
            text.push_str(&format!("    diagnosis: {d}\n"));
        }
        results.push(json!({
            "beta": beta,
            "candidates": candidates,
            "diagnosis": sol.diagnosis,
        }));
    }
    // infeasibility is a result, not a failure
    let mut body = Map::new();
    body.insert("results".into(), Value::Array(results));
    Ok(Outcome {
        status: Status::Pass,
        json: envelope("solve", scenario, opts, Status::Pass, body),
        text,
    })
}

fn deviation_row(label: &str, dev: f64, tol: f64) -> (Row, Check) {
    let mut c = Check::pass();
    c.record(dev, dev <= tol, Vec::new);
    (Row::new(label, c.holds, dev, ""), c)
}

pub fn cmd_roundtrip(scenario: &Scenario, opts: &Options) -> Result<Outcome, InputError> {
    if let Some(o) = invalid_structure("roundtrip", scenario, opts) {
        return Ok(o);
    }
    let (b, model) = built(scenario);
    let g = model.bundle().groupoid();
    let tol = opts.tol;
    let mut rows = Vec::new();
    let mut body = Map::new();
    let mut ok = true;
    let mut any = false;

    if let Some(phi) = &b.state {
        any = true;
        let mut entry = Map::new();
        match disintegrate(model, phi, tol)
            .and_then(|d| Ok((integrate(model, &d.mu, &d.field, tol)?, d)))
        {
            Ok((back, d)) => {
                let dev = phi.distance(&back);
                let (row, c) = deviation_row("state → (μ, Φ) → state", dev, tol);
                ok &= c.holds;
                rows.push(row);
                entry.insert("mu".into(), report::measure(g, &d.mu));
                entry.insert("field".into(), report::field(model, &d.field));
                entry.insert("deviation".into(), json!(dev));
            }
            Err(e) => {
                ok = false;
                rows.push(Row::new(
                    "state → (μ, Φ) → state",
                    false,
                    f64::NAN,
                    e.to_string(),
                ));
                entry.insert("error".into(), json!(e.to_string()));
            }
        }
        let bundle_of_groups = g.arrows().all(|a| g.src(a) == g.tgt(a));
        if bundle_of_groups {
            match decompose_c0x_state(model, phi, tol) {
                Ok(dec) => {
                    let (row, c) = deviation_row("C(X)-algebra decomposition", dec.deviation, tol);
                    ok &= c.holds;
                    rows.push(row);
                    entry.insert(
                        "c0x".into(),
                        json!({
                            "mu": report::measure(g, &dec.mu),
                            "deviation": dec.deviation,
                            "global_trace": dec.global_trace,
                            "fiber_traces": dec.fiber_traces.iter()
                                .map(|(&x, &t)| (g.unit_name(x).to_string(), json!(t)))
                                .collect::<Map<String, Value>>(),
                        }),
                    );
                }
                Err(e) => {
                    ok = false;
                    rows.push(Row::new(
                        "C(X)-algebra decomposition",
                        false,
                        f64::NAN,
                        e.to_string(),
                    ));
                }
            }
        }
        body.insert("state".into(), Value::Object(entry));
    }

    match (&b.measure, &b.field) {
        (Some(mu), Some(field)) => {
            any = true;
            let mut entry = Map::new();
            match integrate(model, mu, field, tol)
                .and_then(|phi| Ok((disintegrate(model, &phi, tol)?, phi)))
            {
                Ok((d, phi)) => {
                    let support = mu.support(tol);
                    let dmu = mu.max_deviation(&d.mu);
                    let dfield = field.distance_on(&d.field, &support);
                    let (r1, c1) = deviation_row("(μ, Φ) → state → μ", dmu, tol);
                    let (r2, c2) = deviation_row("(μ, Φ) → state → Φ", dfield, tol);
                    ok &= c1.holds && c2.holds;
                    rows.push(r1);
                    rows.push(r2);
                    entry.insert("state".into(), report::state(g, &phi, &|a| a));
                    entry.insert("mu_deviation".into(), json!(dmu));
                    entry.insert("field_deviation".into(), json!(dfield));
                }
                Err(e) => {
                    ok = false;
                    rows.push(Row::new("(μ, Φ) → state", false, f64::NAN, e.to_string()));
                    entry.insert("error".into(), json!(e.to_string()));
                }
            }
            body.insert("pair".into(), Value::Object(entry));
        }
        (None, None) => {}
        _ => {
            return Err(input_error(
                scenario,
                "measure",
                "a pair needs both `measure` and `field`",
            ))
        }
    }
    if !any {
        return Err(input_error(
            scenario,
            "state",
            "roundtrip needs a `state` or a `measure` + `field` pair",
        ));
    }
    let status = Status::from(ok);
    Ok(Outcome {
        status,
        json: envelope("roundtrip", scenario, opts, status, body),
        text: report::table(&format!("{}: roundtrip", scenario.name), &rows),
    })
}
