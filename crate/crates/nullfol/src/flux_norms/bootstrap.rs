use crate::error::{invalid, Result};
use crate::heat_lp::besov_norm;
use crate::null_evolution::{mass_aspect, CurvatureInput, CurvatureSample, FoliationState};
use crate::sphere_core::calculus::{dot, grad, mean, tensor_dot_form};
use crate::sphere_core::{LeafField, MetricField, WsReport};

use super::history::HistoryField;
use super::norms::{prefix_lx2_ltinf, prefix_lxinf_lt2, prefix_n_norm, prefix_script, NormLevel, ScriptKind};

/// The terms of the initial data quantity `I₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialQuantity {
    /// Chart-wise deviation of `γ` from `R²γ°`.
    pub atlas: f64,
    /// `‖trχ − 2/r‖_{L^∞}`.
    pub trchi: f64,
    pub grad_trchi: f64,
    pub mu: f64,
    /// `‖trχ̲ + 2/r‖_{B⁰}`.
    pub trchib: f64,
    pub chibh: f64,
}

impl InitialQuantity {
    pub fn total(&self) -> f64 {
        self.atlas + self.trchi + self.grad_trchi + self.mu + self.trchib + self.chibh
    }
}

/// `I₀` on the initial leaf: the atlas term plus `‖trχ − 2/r‖_{L^∞}` and the
/// `B⁰_{2,1}` norms of `∇trχ`, `μ`, `trχ̲ + 2/r` and `χ̲̂`.
pub fn initial_quantity(state: &FoliationState, ws: &WsReport, curv: &CurvatureSample) -> Result<InitialQuantity> {
    let g = &state.gamma;
    let two_over_r = 2.0 / state.r;
    Ok(InitialQuantity {
        atlas: ws.sph_deviation,
        trchi: state.trchi.map(|t| t - two_over_r).max_abs(),
        grad_trchi: besov_norm(&grad(&state.trchi, g), 0.0, g)?,
        mu: besov_norm(&mass_aspect(state, curv).mu, 0.0, g)?,
        trchib: besov_norm(&state.trchib.map(|t| t + two_over_r), 0.0, g)?,
        chibh: besov_norm(&state.chibh, 0.0, g)?,
    })
}

/// One side of a bootstrap inequality evaluated on every prefix `[0, s_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaTerm {
    pub label: String,
    pub prefix: Vec<f64>,
}

impl BaTerm {
    pub fn value(&self) -> f64 {
        self.prefix.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaFlag {
    pub name: &'static str,
    pub bound: f64,
    pub terms: Vec<BaTerm>,
    /// Largest term over the whole run.
    pub lhs: f64,
    /// `bound − lhs`; negative on failure.
    pub margin: f64,
    pub pass: bool,
    /// First sample `s` at which some term exceeds the bound.
    pub first_failure: Option<f64>,
}

impl BaFlag {
    fn new(name: &'static str, bound: f64, terms: Vec<BaTerm>, s: &[f64]) -> Self {
        let lhs = terms.iter().map(BaTerm::value).fold(0.0, f64::max);
        let first = (0..s.len()).find(|&i| terms.iter().any(|t| t.prefix[i] > bound)).map(|i| s[i]);
        Self { name, bound, terms, lhs, margin: bound - lhs, pass: lhs <= bound, first_failure: first }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapReport {
    pub delta0: f64,
    pub s: Vec<f64>,
    pub flags: Vec<BaFlag>,
}

impl BootstrapReport {
    pub fn all_pass(&self) -> bool {
        self.flags.iter().all(|f| f.pass)
    }

    /// The assumption that fails at the smallest `s`, ties going to the lower number.
    pub fn first_failure(&self) -> Option<(&'static str, f64)> {
        self.flags
            .iter()
            .filter_map(|f| f.first_failure.map(|s| (f.name, s)))
            .fold(None, |best, (n, s)| match best {
                Some((_, b)) if b <= s => best,
                _ => Some((n, s)),
            })
    }
}

/// Contracts two connection coefficients down to the lowest rank their
/// ranks allow, keeping the result in a space the LP calculus handles.
fn pair_product(a: &LeafField, b: &LeafField, g: &MetricField) -> LeafField {
    match (a.rank().order(), b.rank().order()) {
        (0, _) => b.mul_scalar(a),
        (_, 0) => a.mul_scalar(b),
        (1, 2) => tensor_dot_form(b, a, g),
        (2, 1) => tensor_dot_form(a, b, g),
        _ => dot(a, b, g),
    }
}

fn running_max(v: &[f64]) -> Vec<f64> {
    let mut m = 0.0f64;
    v.iter().map(|x| {
        m = m.max(*x);
        m
    }).collect()
}

fn term(label: &str, prefix: Vec<f64>) -> BaTerm {
    BaTerm { label: label.to_string(), prefix }
}

/// Evaluates both sides of BA1 through BA5 on the recorded run.
///
/// `A = {trχ − 2/r, χ̂, ζ}`, `A̲ = A ∪ {trχ̲ + 2/r, χ̲̂}`, `M = {∇trχ, μ}`.
/// BA5 carries the `𝓟⁰` norm of every pairwise product `A·A̲`; its left side is the largest.
pub fn bootstrap_audit(history: &[FoliationState], curv: &CurvatureInput, delta0: f64) -> Result<BootstrapReport> {
    if !(delta0 > 0.0) || !delta0.is_finite() {
        return invalid(format!("Δ₀ must be positive, got {delta0}"));
    }
    if history.len() < 3 {
        return invalid(format!("bootstrap audit needs at least 3 leaves, got {}", history.len()));
    }
    let s: Vec<f64> = history.iter().map(|st| st.s).collect();
    let field = |f: &dyn Fn(&FoliationState) -> LeafField| HistoryField::from_run(history, f);

    let (mut ba1_mean, mut ba1_osc) = (Vec::new(), Vec::new());
    for st in history {
        let bar = mean(&st.trchi, &st.gamma);
        ba1_mean.push(st.r * (bar - 2.0 / st.r).abs());
        ba1_osc.push(st.r * st.trchi.map(|t| t - bar).max_abs());
    }
    let ba1 = vec![term("r|mean trchi - 2/r|", running_max(&ba1_mean)), term("r|trchi - mean trchi|", running_max(&ba1_osc))];

    let trchi = field(&|st| st.trchi.map(|t| t - 2.0 / st.r))?;
    let chih = field(&|st| st.chih.clone())?;
    let zeta = field(&|st| st.zeta.clone())?;
    let grad_trchi = field(&|st| grad(&st.trchi, &st.gamma))?;
    let mu = field(&|st| mass_aspect(st, &curv.sample(st.s, &st.gamma)).mu)?;
    let trchib = field(&|st| st.trchib.map(|t| t + 2.0 / st.r))?;
    let chibh = field(&|st| st.chibh.clone())?;

    let ba2 = vec![
        term("chih LxInf_Lt2", prefix_lxinf_lt2(&chih)),
        term("zeta LxInf_Lt2", prefix_lxinf_lt2(&zeta)),
        term("grad trchi Lx2_LtInf", prefix_lx2_ltinf(&grad_trchi)),
        term("mu Lx2_LtInf", prefix_lx2_ltinf(&mu)),
        term("chih N1", prefix_n_norm(&chih, NormLevel::One)?),
        term("zeta N1", prefix_n_norm(&zeta, NormLevel::One)?),
    ];
    let ba3 = vec![
        term("trchib + 2/r Lx2_LtInf", prefix_lx2_ltinf(&trchib)),
        term("chibh Lx2_LtInf", prefix_lx2_ltinf(&chibh)),
    ];
    let ba4 = vec![
        term("trchib + 2/r B0", prefix_script(&trchib, ScriptKind::B, 0.0)?),
        term("chibh B0", prefix_script(&chibh, ScriptKind::B, 0.0)?),
    ];

    let a = [("trchi - 2/r", &trchi), ("chih", &chih), ("zeta", &zeta)];
    let a_bar = [a[0], a[1], a[2], ("trchib + 2/r", &trchib), ("chibh", &chibh)];
    let mut ba5 = Vec::new();
    for (na, fa) in a {
        for (nb, fb) in a_bar {
            let fields = fa.fields().iter().zip(fb.fields()).zip(fa.metrics()).map(|((x, y), g)| pair_product(x, y, g)).collect();
            let prod = HistoryField::new(s.clone(), fields, fa.metrics().to_vec())?;
            ba5.push(term(&format!("{na} * {nb} P0"), prefix_script(&prod, ScriptKind::P, 0.0)?));
        }
    }

    let flags = vec![
        BaFlag::new("BA1", delta0, ba1, &s),
        BaFlag::new("BA2", delta0, ba2, &s),
        BaFlag::new("BA3", delta0, ba3, &s),
        BaFlag::new("BA4", delta0, ba4, &s),
        BaFlag::new("BA5", delta0 * delta0, ba5, &s),
    ];
    Ok(BootstrapReport { delta0, s, flags })
}
