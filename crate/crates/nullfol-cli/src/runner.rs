//! Run orchestration: initial data, evolution, state series, audits and
//! the JSON report.

use std::fmt::Write as _;

use nullfol::flux_norms::{
    bootstrap_audit, corpus_constant, curvature_flux, initial_quantity, inequality_audit, mixed_norm, n_norms, real,
    script_norm, AuditInput, HistoryField, Inequality, MixedKind, NormLevel, NormReport, ScriptKind,
};
use nullfol::heat_lp::{commutator_diag, LeafSample};
use nullfol::hodge_ops::{identity_residual, Identity, IdentityInputs};
use nullfol::minkowski_oracle::{caustic_time, exact_state, MinkowskiData};
use nullfol::null_evolution::{
    area_law_residual, commutation_check, evolve, residuals, volume_law_residual, Commutation, CurvatureInput,
    Evolution, EvolveParams, FoliationState, Termination,
};
use nullfol::sphere_core::calculus::{gauss_curvature, grad, integrate, l2_norm, mean, norm_sq, traceless_part};
use nullfol::sphere_core::harmonics::{random_one_form, random_scalar, random_stt};
use nullfol::sphere_core::{make_grid, ws_audit, LeafField};
use nullfol::{NullfolError, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{RunConfig, Scenario, Suite};

/// Exit status of one invocation.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CAUSTIC: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

/// Exit code for a library error: bad arguments trace back to the configuration.
pub fn exit_code_of(e: &NullfolError) -> i32 {
    match e {
        NullfolError::InvalidArgument(_) => EXIT_CONFIG,
        NullfolError::NumericFailure { .. } | NullfolError::DomainError(_) => EXIT_NUMERIC,
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub evolution: Evolution,
    pub csv: String,
    pub report: NormReport,
    pub exit_code: i32,
}

/// Leaf-wise statistics written to the state series, before the residuals.
pub const SERIES_COLUMNS: [&str; 5] = ["s", "r", "mean_trchi", "max_abs_trchi_minus_2_over_r", "chih_l2"];

fn initial_data(cfg: &RunConfig) -> Result<(FoliationState, CurvatureInput)> {
    let grid = make_grid(cfg.l_max)?;
    Ok(match cfg.scenario {
        Scenario::MinkowskiRound => (FoliationState::minkowski_round(grid, cfg.r0)?, CurvatureInput::zero()),
        Scenario::MinkowskiAnisotropic => {
            let d = MinkowskiData::with_radius(cfg.trchi0, cfg.chih0, cfg.r0)?;
            (FoliationState::minkowski_homogeneous(grid, &d)?, CurvatureInput::zero())
        }
        Scenario::Perturbed => {
            (FoliationState::perturbed(grid, cfg.r0, cfg.eps, cfg.band, cfg.seed)?, CurvatureInput::zero())
        }
        Scenario::SyntheticCurvature => {
            let curv = CurvatureInput::synthetic(&grid, cfg.band, cfg.amplitude, cfg.seed)?;
            (FoliationState::minkowski_round(grid, cfg.r0)?, curv)
        }
    })
}

fn params(cfg: &RunConfig) -> EvolveParams {
    EvolveParams {
        h: cfg.h,
        tol: cfg.tolerances.step_tol,
        caustic_threshold: cfg.tolerances.caustic_threshold,
        record_stride: cfg.record_stride,
        ..EvolveParams::default()
    }
}

fn fmt_real(x: f64) -> String {
    nullfol::flux_norms::format_real(x)
}

/// State series: one row per recorded leaf, reals with 17 significant digits.
fn series(history: &[FoliationState], curv: &CurvatureInput) -> Result<String> {
    let mut out = String::new();
    let names = residuals(&history[0], curv)?.named().map(|(n, _)| n);
    let header: Vec<&str> = SERIES_COLUMNS.iter().copied().chain(names).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for st in history {
        let g = &st.gamma;
        let row = [
            st.s,
            st.r,
            mean(&st.trchi, g),
            st.trchi.map(|t| t - 2.0 / st.r).max_abs(),
            l2_norm(&st.chih, g),
        ];
        let res = residuals(st, curv)?;
        let cells: Vec<String> = row.into_iter().chain(res.named().map(|(_, v)| v)).map(fmt_real).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Every `stride`-th leaf and the last one.
fn thin(history: &[FoliationState], stride: usize) -> Vec<FoliationState> {
    let last = history.len() - 1;
    history.iter().enumerate().filter(|(i, _)| i % stride == 0 || *i == last).map(|(_, st)| st.clone()).collect()
}

fn run_section(report: &mut NormReport, cfg: &RunConfig, ev: &Evolution) {
    let sec = "run";
    report.set(sec, "scenario", Value::from(cfg.scenario.name()));
    report.set(sec, "l_max", Value::from(cfg.l_max));
    report.set(sec, "seed", Value::from(cfg.seed));
    report.set_real(sec, "r0", cfg.r0);
    report.set_real(sec, "h", cfg.h);
    report.set_real(sec, "s_end", cfg.s_end);
    report.set_real(sec, "s_final", ev.last().s);
    report.set(sec, "leaves", Value::from(ev.history.len()));
    report.set(sec, "accepted_steps", Value::from(ev.accepted));
    report.set(sec, "rejected_steps", Value::from(ev.rejected));
    let (status, caustic) = match ev.termination {
        Termination::Completed => ("completed", Value::Null),
        Termination::Caustic { s } => ("caustic", real(s)),
    };
    report.set(sec, "termination", Value::from(status));
    report.set(sec, "caustic_s", caustic);
}

/// Pulls one tracked field off a leaf.
type Extract = fn(&FoliationState) -> LeafField;

/// Flux, `I₀` and the spacetime norms of the tracked fields.
fn norms_section(report: &mut NormReport, cfg: &RunConfig, ev: &Evolution, audit: &[FoliationState], curv: &CurvatureInput) -> Result<()> {
    let first = &ev.history[0];
    report.set_real("flux", "R0", curvature_flux(&ev.history, curv)?);
    let ws = ws_audit(&first.gamma, cfg.tolerances.ws_threshold);
    let i0 = initial_quantity(first, &ws, &curv.sample(first.s, &first.gamma))?;
    report.set_real("flux", "I0", i0.total());
    report.set(
        "flux",
        "I0_terms",
        json!({
            "atlas": real(i0.atlas),
            "trchi": real(i0.trchi),
            "grad_trchi": real(i0.grad_trchi),
            "mu": real(i0.mu),
            "trchib": real(i0.trchib),
            "chibh": real(i0.chibh),
        }),
    );
    report.set("flux", "ws_pass", Value::from(ws.pass));
    report.set("flux", "ws_charts", Value::from(ws.charts));

    let fields: [(&str, Extract); 3] = [
        ("trchi_minus_2_over_r", |st| st.trchi.map(|t| t - 2.0 / st.r)),
        ("chih", |st| st.chih.clone()),
        ("zeta", |st| st.zeta.clone()),
    ];
    for (name, f) in fields {
        let h = HistoryField::from_run(audit, f)?;
        let mut v = serde_json::Map::new();
        if h.len() >= 3 {
            v.insert("N1".into(), real(n_norms(&h, NormLevel::One)?));
            v.insert("N2".into(), real(n_norms(&h, NormLevel::Two)?));
        } else {
            v.insert("N1".into(), Value::from("skipped: fewer than 3 leaves"));
            v.insert("N2".into(), Value::from("skipped: fewer than 3 leaves"));
        }
        for kind in [MixedKind::LxInfLt2, MixedKind::Lx2LtInf, MixedKind::LtInfLx2] {
            v.insert(kind.name().into(), real(mixed_norm(&h, kind, None)?));
        }
        for kind in [MixedKind::LtInfLxp, MixedKind::Lt2Lxp] {
            v.insert(format!("{}_p4", kind.name()), real(mixed_norm(&h, kind, Some(4.0))?));
        }
        if name == "trchi_minus_2_over_r" {
            v.insert("B0".into(), real(script_norm(&h, ScriptKind::B, 0.0)?));
            v.insert("P0".into(), real(script_norm(&h, ScriptKind::P, 0.0)?));
        }
        report.set("norms", name, Value::Object(v));
    }
    Ok(())
}

fn identity_inputs(g: &nullfol::sphere_core::MetricField, band: usize, seed: u64) -> IdentityInputs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = g.grid();
    IdentityInputs {
        scalar: random_scalar(grid, band, 1, &mut rng),
        one_form: random_one_form(grid, band, &mut rng),
        stt: traceless_part(&random_stt(grid, band, &mut rng), g),
        pair: (random_scalar(grid, band, 1, &mut rng), random_scalar(grid, band, 1, &mut rng)),
    }
}

fn identities_suite(report: &mut NormReport, cfg: &RunConfig, ev: &Evolution, audit: &[FoliationState], curv: &CurvatureInput) -> Result<()> {
    let sec = "identities";
    let tol = cfg.tolerances.identity;
    let mut clean = true;
    let ends = [&ev.history[0], ev.last()];
    for which in Identity::ALL {
        let mut worst = 0.0f64;
        for st in ends {
            worst = worst.max(identity_residual(which, &identity_inputs(&st.gamma, cfg.band, cfg.seed), &st.gamma)?);
        }
        clean &= worst <= tol;
        report.set_real(sec, which.name(), worst);
    }
    let mut gb = 0.0f64;
    for st in audit {
        gb = gb.max((integrate(&gauss_curvature(&st.gamma), &st.gamma)? - 4.0 * std::f64::consts::PI).abs());
    }
    clean &= gb <= tol;
    report.set_real(sec, "gauss_bonnet", gb);

    let mut worst = [0.0f64; 8];
    let mut names = [""; 8];
    for st in audit {
        for (i, (n, v)) in residuals(st, curv)?.named().into_iter().enumerate() {
            worst[i] = worst[i].max(v);
            names[i] = n;
        }
    }
    let mut consistent = true;
    for (n, v) in names.iter().zip(worst) {
        report.set_real(sec, n, v);
        if n.starts_with("bianchi") {
            consistent &= v <= cfg.tolerances.bianchi;
        } else {
            clean &= v <= tol;
        }
    }
    report.set(sec, "curvature_input", Value::from(if consistent { "consistent" } else { "inconsistent" }));
    if ev.history.len() >= 3 {
        let vol = volume_law_residual(&ev.history)?;
        let area = area_law_residual(&ev.history)?;
        clean &= vol <= tol && area <= tol;
        report.set_real(sec, "volume_law", vol);
        report.set_real(sec, "area_law", area);
    } else {
        report.set(sec, "volume_law", Value::from("skipped: fewer than 3 leaves"));
        report.set(sec, "area_law", Value::from("skipped: fewer than 3 leaves"));
    }
    report.set(sec, "flag", Value::from(if clean { "clean" } else { "above_tolerance" }));
    Ok(())
}

fn inequalities_suite(report: &mut NormReport, cfg: &RunConfig, ev: &Evolution, audit: &[FoliationState]) -> Result<()> {
    for which in Inequality::all() {
        report.add_corpus_constant(&corpus_constant(which, cfg.corpus_seed)?);
    }
    let last = ev.last();
    let g = &last.gamma;
    let tr = &last.trchi;
    for which in [Inequality::Gn { p: 4.0 }, Inequality::BesovSob, Inequality::SharpSob, Inequality::Isoperimetric] {
        let r = inequality_audit(which, AuditInput::Leaf { field: tr, metric: g })?;
        report.set_real("inequalities", &format!("{}_final_trchi", which.name()), r);
    }
    let dtr = grad(tr, g);
    let r = inequality_audit(Inequality::Lt2LxpDinv { p: 1.5 }, AuditInput::Leaf { field: &dtr, metric: g })?;
    report.set_real("inequalities", "Lt2Lxp_Dinv_final_grad_trchi", r);
    let key = "Lx4_trchi_history";
    if audit.len() >= 3 {
        let h = HistoryField::from_run(audit, |st| st.trchi.clone())?;
        report.set_real("inequalities", key, inequality_audit(Inequality::Lx4, AuditInput::History(&h))?);
    } else {
        report.set("inequalities", key, Value::from("skipped: fewer than 3 leaves"));
    }
    Ok(())
}

fn commutators_suite(report: &mut NormReport, cfg: &RunConfig, ev: &Evolution, audit: &[FoliationState], curv: &CurvatureInput) -> Result<()> {
    let sec = "commutators";
    let skip = || Value::from("skipped: fewer than 3 leaves");
    if audit.len() >= 3 {
        let samples: Vec<LeafSample<'_>> =
            audit.iter().map(|st| LeafSample { s: st.s, metric: &st.gamma, field: &st.trchi }).collect();
        let c = commutator_diag(&samples, cfg.commutator_a, cfg.commutator_eps)?;
        report.set(
            sec,
            "heat_trchi",
            json!({ "a": real(c.a), "eps": real(c.eps), "lhs": real(c.lhs_norm), "rhs": real(c.rhs_norm), "ratio": real(c.ratio) }),
        );
    } else {
        report.set(sec, "heat_trchi", skip());
    }
    let h = &ev.history;
    let scalars: Vec<LeafField> = h.iter().map(|st| st.trchi.clone()).collect();
    let forms: Vec<LeafField> = h.iter().map(|st| grad(&st.trchi, &st.gamma)).collect();
    for which in [Commutation::ScalarGrad, Commutation::Laplacian, Commutation::Div, Commutation::General] {
        let key = format!("transport_{}", which.name());
        if h.len() < 3 {
            report.set(sec, &key, skip());
            continue;
        }
        let fields = match which {
            Commutation::ScalarGrad | Commutation::Laplacian => &scalars,
            Commutation::Div | Commutation::General => &forms,
        };
        report.set_real(sec, &key, commutation_check(h, curv, fields, which)?);
    }
    Ok(())
}

fn bootstrap_suite(report: &mut NormReport, cfg: &RunConfig, audit: &[FoliationState], curv: &CurvatureInput) -> Result<()> {
    if audit.len() < 3 {
        report.set("bootstrap", "status", Value::from("skipped: fewer than 3 leaves"));
        return Ok(());
    }
    report.add_bootstrap(&bootstrap_audit(audit, curv, cfg.delta0)?);
    Ok(())
}

/// Evolves the configured data and runs `suites` on the result.
pub fn run(cfg: &RunConfig, suites: &[Suite]) -> Result<RunOutput> {
    let (initial, curv) = initial_data(cfg)?;
    let ev = evolve(&initial, &curv, cfg.s_end, &params(cfg))?;
    report_run(cfg, suites, ev, &curv)
}

fn report_run(cfg: &RunConfig, suites: &[Suite], ev: Evolution, curv: &CurvatureInput) -> Result<RunOutput> {
    let csv = series(&ev.history, curv)?;
    let audit = thin(&ev.history, cfg.audit_stride);
    let mut report = NormReport::new();
    run_section(&mut report, cfg, &ev);
    norms_section(&mut report, cfg, &ev, &audit, curv)?;
    for suite in suites {
        match suite {
            Suite::Identities => identities_suite(&mut report, cfg, &ev, &audit, curv)?,
            Suite::Inequalities => inequalities_suite(&mut report, cfg, &ev, &audit)?,
            Suite::Bootstrap => bootstrap_suite(&mut report, cfg, &audit, curv)?,
            Suite::Commutators => commutators_suite(&mut report, cfg, &ev, &audit, curv)?,
        }
    }
    let exit_code = match ev.termination {
        Termination::Completed => EXIT_OK,
        Termination::Caustic { .. } => EXIT_CAUSTIC,
    };
    Ok(RunOutput { evolution: ev, csv, report, exit_code })
}

/// Largest deviations from the closed-form homogeneous solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleErrors {
    pub trchi: f64,
    pub chih: f64,
    pub v: f64,
    /// End of the compared interval, `min(s_end, 0.9 s₀)`.
    pub s_stop: f64,
}

impl OracleErrors {
    pub fn max(&self) -> f64 {
        self.trchi.max(self.chih).max(self.v)
    }
}

/// Oracle data of a homogeneous scenario.
pub fn oracle_data(cfg: &RunConfig) -> Result<MinkowskiData> {
    match cfg.scenario {
        Scenario::MinkowskiRound => MinkowskiData::round(cfg.r0),
        Scenario::MinkowskiAnisotropic => MinkowskiData::with_radius(cfg.trchi0, cfg.chih0, cfg.r0),
        other => Err(NullfolError::InvalidArgument(format!(
            "oracle comparison needs homogeneous Minkowski data, scenario is {}",
            other.name()
        ))),
    }
}

fn shear_norm(st: &FoliationState) -> LeafField {
    norm_sq(&st.chih, &st.gamma).map(|q| q.max(0.0).sqrt())
}

/// Max over recorded leaves and nodes of `|trχ − exact|`, `||χ̂| − exact|` and `|v − Δ|`.
///
/// The shear is compared with `|χ̂₀|/Δ(s)` where `|χ̂₀|` is read off the
/// discrete initial leaf, so representation round-off of the data is not
/// counted as evolution error.
pub fn oracle_errors(history: &[FoliationState], d: &MinkowskiData) -> Result<OracleErrors> {
    let mut e = OracleErrors { trchi: 0.0, chih: 0.0, v: 0.0, s_stop: history.last().map_or(0.0, |st| st.s) };
    let Some(first) = history.first() else { return Ok(e) };
    let shear0 = shear_norm(first);
    let slack = 1e-12 * d.chih0_norm.max(1.0);
    if first.s != 0.0 || shear0.values().iter().any(|q| (q - d.chih0_norm).abs() > slack) {
        return Err(NullfolError::InvalidArgument("initial leaf does not carry the oracle data".into()));
    }
    for st in history {
        let x = exact_state(d, st.s)?;
        let shear = shear_norm(st);
        e.trchi = e.trchi.max(st.trchi.map(|t| t - x.trchi).max_abs());
        let dev = shear.values().iter().zip(shear0.values()).map(|(q, q0)| (q - q0 / x.delta).abs());
        e.chih = dev.fold(e.chih, f64::max);
        e.v = e.v.max(st.v.map(|v| v - x.delta).max_abs());
    }
    Ok(e)
}

/// Evolves homogeneous data to `min(s_end, 0.9 s₀)` and compares with the closed form.
pub fn oracle_compare(cfg: &RunConfig) -> Result<(OracleErrors, RunOutput)> {
    let d = oracle_data(cfg)?;
    let s_stop = caustic_time(&d).map_or(cfg.s_end, |s0| cfg.s_end.min(0.9 * s0));
    let (initial, curv) = initial_data(cfg)?;
    let ev = evolve(&initial, &curv, s_stop, &params(cfg))?;
    let errors = oracle_errors(&ev.history, &d)?;
    let mut out = report_run(cfg, &[], ev, &curv)?;
    let sec = "oracle";
    out.report.set_real(sec, "trchi_error", errors.trchi);
    out.report.set_real(sec, "chih_error", errors.chih);
    out.report.set_real(sec, "v_error", errors.v);
    out.report.set_real(sec, "s_stop", errors.s_stop);
    out.report.set("oracle", "match", Value::from(errors.max() < cfg.tolerances.oracle));
    Ok((errors, out))
}

/// One-line summary of a report for the terminal.
pub fn summary(out: &RunOutput) -> String {
    let mut s = String::new();
    let last = out.evolution.last();
    let _ = write!(s, "s = {}, r = {}, leaves = {}", fmt_real(last.s), fmt_real(last.r), out.evolution.history.len());
    if let Termination::Caustic { s: sc } = out.evolution.termination {
        let _ = write!(s, ", caustic at s = {}", fmt_real(sc));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use nullfol::null_evolution::CurvatureSample;

    #[test]
    fn thinning_keeps_first_and_last() {
        let cfg = RunConfig { l_max: 4, band: 2, s_end: 0.25, h: 0.05, ..RunConfig::default() };
        let (st, curv) = initial_data(&cfg).unwrap();
        let ev = evolve(&st, &curv, cfg.s_end, &params(&cfg)).unwrap();
        let t = thin(&ev.history, 2);
        let s: Vec<f64> = t.iter().map(|x| x.s).collect();
        let n = ev.history.len();
        assert_eq!(s.len(), (n - 1).div_ceil(2) + 1);
        assert_eq!(s[0], 0.0);
        assert_eq!(*s.last().unwrap(), ev.last().s);
    }

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(exit_code_of(&NullfolError::InvalidArgument("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code_of(&NullfolError::DomainError("x".into())), EXIT_NUMERIC);
        let n = NullfolError::NumericFailure { message: "x".into(), residual: 1.0 };
        assert_eq!(exit_code_of(&n), EXIT_NUMERIC);
    }

    #[test]
    fn curvature_sample_shape_matches_grid() {
        let cfg = RunConfig { scenario: Scenario::SyntheticCurvature, l_max: 4, band: 2, ..RunConfig::default() };
        let (st, curv) = initial_data(&cfg).unwrap();
        let c: CurvatureSample = curv.sample(0.0, &st.gamma);
        assert_eq!(c.rho.n_nodes(), st.n_nodes());
        assert!(!c.is_zero());
    }
}
