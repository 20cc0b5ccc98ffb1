//! Scenario configuration, orchestration of analyses and the JSON report.

use std::collections::BTreeMap;
use std::io;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::coxeter::{curvature_normals, hyperplane_permutation_check, hyperplane_point_tests, reflection_group, DEFAULT_GROUP_CAP};
use crate::error::{Error, Result};
use crate::holonomy::{analyze, bridge_check, commuting_certificate, loop_holonomy_probe, AdaptedCurvature};
use crate::numeric::{matrix_exp, parse_matrix_literal};
use crate::orbit::{build_orbit, OrbitSubmanifold};
use crate::pair::SymmetricPairRep;
use crate::rng::{probe_rng, unit_vector, ProbeRng};
use crate::tol::Tolerances;
use crate::transport::{transport_audit, transported_spectrum_drift, CurveSegment, OrbitCurve};
use crate::tubes::{
    caustic_rank_check, choose_tube_direction, compare_tube_spectra, dupin_check, normal_exponential_differential,
    TubeParams, TUBE_SAFETY,
};
use crate::veronese::{congruence_check, isometry_check, minimal_dimension_scan, veronese_identities, verify_veronese_facts};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    Orbit,
    Holonomy,
    Bound,
    Tube,
    Coxeter,
    VeroneseFacts,
    Transport,
}

impl Analysis {
    pub fn name(self) -> &'static str {
        match self {
            Analysis::Orbit => "orbit",
            Analysis::Holonomy => "holonomy",
            Analysis::Bound => "bound",
            Analysis::Tube => "tube",
            Analysis::Coxeter => "coxeter",
            Analysis::VeroneseFacts => "veronese-facts",
            Analysis::Transport => "transport",
        }
    }
}

impl std::str::FromStr for Analysis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.trim().to_string()))
            .map_err(|_| Error::Config(format!("unknown analysis {s:?}")))
    }
}

/// One curve leg: either an algebra basis index or an explicit skew matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveStep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// `sl-so:<r>` or `product:sl-so:<a>,sl-so:<b>,...`.
    pub representation: String,
    /// `veronese`, `diag:[...]`, `random-regular:<seed>` or `matrix:[[...]]`;
    /// products take one comma-separated entry per block.
    pub point: String,
    #[serde(default)]
    pub analyses: Vec<Analysis>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default)]
    pub curve: Vec<CurveStep>,
    #[serde(default = "default_step")]
    pub transport_step: f64,
    #[serde(default)]
    pub tube: TubeParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn default_probes() -> usize {
    8
}

fn default_step() -> f64 {
    1e-3
}

impl ScenarioConfig {
    pub fn new(representation: &str, point: &str, analyses: Vec<Analysis>, seed: u64) -> Self {
        Self {
            representation: representation.to_string(),
            point: point.to_string(),
            analyses,
            tolerances: Tolerances::default(),
            seed,
            probes: default_probes(),
            curve: Vec::new(),
            transport_step: default_step(),
            tube: TubeParams::default(),
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        parse_representation(&self.representation)?;
        self.tube.validate()?;
        if !(self.transport_step > 0.0 && self.transport_step.is_finite()) {
            return Err(Error::Config("transport_step must be positive".into()));
        }
        if self.probes == 0 {
            return Err(Error::Config("probes must be at least 1".into()));
        }
        for (i, s) in self.curve.iter().enumerate() {
            if s.generator.is_some() == s.matrix.is_some() {
                return Err(Error::Config(format!("curve step {i} needs exactly one of generator or matrix")));
            }
        }
        Ok(())
    }
}

/// Parses `sl-so:<r>` and `product:sl-so:<a>,sl-so:<b>,...`.
pub fn parse_representation(spec: &str) -> Result<SymmetricPairRep> {
    let spec = spec.trim();
    let block = |s: &str| -> Result<usize> {
        s.trim()
            .strip_prefix("sl-so:")
            .and_then(|r| r.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::Config(format!("bad representation block {s:?}, expected sl-so:<r>")))
    };
    let rep = if let Some(rest) = spec.strip_prefix("product:") {
        let blocks = rest.split(',').map(block).collect::<Result<Vec<_>>>()?;
        SymmetricPairRep::product(&blocks)
    } else {
        SymmetricPairRep::sl_so(block(spec)?)
    };
    rep.map_err(|e| Error::Config(e.to_string()))
}

/// Splits on commas outside brackets.
pub fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn block_point(spec: &str, r: usize) -> Result<DMatrix<f64>> {
    let spec = spec.trim();
    if spec == "veronese" {
        return crate::veronese::veronese_type_point(r, 1.0);
    }
    if let Some(seed) = spec.strip_prefix("random-regular:") {
        let seed: u64 = seed.trim().parse().map_err(|_| Error::Config(format!("bad seed in {spec:?}")))?;
        let mut rng = probe_rng(seed);
        let mut diag: Vec<f64> = (0..r).map(|i| i as f64 + crate::rng::uniform(&mut rng, 0.1, 0.9)).collect();
        let mean = diag.iter().sum::<f64>() / r as f64;
        diag.iter_mut().for_each(|d| *d -= mean);
        let d = DMatrix::from_diagonal(&DVector::from_vec(diag));
        let a = crate::rng::gaussian_vector(&mut rng, r * r);
        let x = DMatrix::from_column_slice(r, r, a.as_slice());
        let g = matrix_exp(&(&x - x.transpose()), 1.0)?;
        return Ok(&g * d * g.transpose());
    }
    let m = if let Some(rows) = spec.strip_prefix("matrix:") {
        parse_matrix_literal(rows)?
    } else if spec.starts_with("diag:") {
        parse_matrix_literal(spec)?
    } else {
        return Err(Error::Config(format!("unknown point spec {spec:?}")));
    };
    if m.nrows() != r || m.ncols() != r {
        return Err(Error::Config(format!("point {spec:?} is {}x{}, block needs {r}x{r}", m.nrows(), m.ncols())));
    }
    Ok(m)
}

pub fn parse_point(rep: &SymmetricPairRep, spec: &str) -> Result<DVector<f64>> {
    let parts = split_top_level(spec);
    if parts.len() != rep.blocks().len() {
        return Err(Error::Config(format!(
            "point has {} entries, representation {} has {} blocks",
            parts.len(),
            rep,
            rep.blocks().len()
        )));
    }
    let mats = parts.iter().zip(rep.blocks()).map(|(p, &r)| block_point(p, r)).collect::<Result<Vec<_>>>()?;
    rep.block_point(&mats).map_err(|e| Error::Config(e.to_string()))
}

pub fn build_curve(rep: &SymmetricPairRep, steps: &[CurveStep]) -> Result<OrbitCurve> {
    let mut segments = Vec::with_capacity(steps.len());
    for s in steps {
        let z = match (&s.generator, &s.matrix) {
            (Some(k), None) => rep
                .algebra_basis()
                .get(*k)
                .cloned()
                .ok_or_else(|| Error::Config(format!("generator index {k} out of range")))?,
            (None, Some(rows)) => {
                let m = parse_matrix_literal(&serde_json::to_string(rows).expect("rows serialize"))?;
                if m.nrows() != rep.matrix_size() || (&m + m.transpose()).amax() > 1e-12 {
                    return Err(Error::Config("curve matrix must be skew and match the representation".into()));
                }
                m
            }
            _ => return Err(Error::Config("curve step needs exactly one of generator or matrix".into())),
        };
        segments.push(CurveSegment { generator: rep.action_matrix(&z), duration: s.t });
    }
    Ok(OrbitCurve::new(segments))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisOutcome {
    pub status: Status,
    pub data: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub passed: bool,
    pub requested: usize,
    pub failed: Vec<String>,
    pub errored: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: ScenarioConfig,
    pub results: BTreeMap<String, AnalysisOutcome>,
    pub summary: Summary,
    /// Wall-clock milliseconds per analysis; not part of the deterministic body.
    #[serde(skip)]
    pub timings_ms: BTreeMap<String, f64>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.summary.passed
    }

    /// The deterministic body: everything except timings.
    pub fn body_json(&self) -> String {
        to_json_17(&serde_json::to_value(self).expect("report serializes"))
    }

    /// The body plus a `timings_ms` member.
    pub fn full_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["timings_ms"] = serde_json::to_value(&self.timings_ms).expect("timings serialize");
        to_json_17(&v)
    }
}

/// Pretty JSON with every float written with 17 significant digits.
pub fn to_json_17(v: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFormatter::default());
    v.serialize(&mut ser).expect("in-memory JSON");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

#[derive(Default)]
struct SigFormatter {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

impl serde_json::ser::Formatter for SigFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("result types serialize")
}

type Outcome = Result<(bool, Value)>;

struct Context {
    cfg: ScenarioConfig,
    rep: SymmetricPairRep,
    orbit: OrbitSubmanifold,
    curve: OrbitCurve,
}

impl Context {
    fn rng(&self, a: Analysis) -> ProbeRng {
        probe_rng(self.cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(a as u64 + 1)))
    }

    fn run(&self, a: Analysis) -> Outcome {
        let mut rng = self.rng(a);
        match a {
            Analysis::Orbit => self.orbit_analysis(),
            Analysis::Holonomy => self.holonomy_analysis(&mut rng),
            Analysis::Bound => self.bound_analysis(&mut rng),
            Analysis::Tube => self.tube_analysis(&mut rng),
            Analysis::Coxeter => self.coxeter_analysis(&mut rng),
            Analysis::VeroneseFacts => self.veronese_analysis(&mut rng),
            Analysis::Transport => self.transport_analysis(&mut rng),
        }
    }

    fn orbit_analysis(&self) -> Outcome {
        let m = &self.orbit;
        let tol = &self.cfg.tolerances;
        let minimality = m.minimality(1e-8);
        let homothecy = if m.normal_bar().dim() > 0 { Some(m.homothecy_test(1e-8)?) } else { None };
        let alpha = m.second_fundamental_form();
        let fd = m.alpha_finite_difference(1e-3)?;
        let fd_error = alpha.max_difference(&fd);
        let asym = alpha.max_asymmetry();
        let data = json!({
            "dim": m.dim(),
            "codim": m.codim(),
            "normal_bar_dim": m.normal_bar().dim(),
            "carrier_dim": self.rep.carrier_dim(),
            "input_norm": m.input_norm(),
            "first_normal_space_dim": m.first_normal_space_dim(tol.rank),
            "minimality": to_value(&minimality),
            "homothecy": homothecy.as_ref().map(to_value),
            "alpha_asymmetry": asym,
            "alpha_finite_difference_error": fd_error,
            "mean_curvature_coords": m.mean_curvature_coords().iter().copied().collect::<Vec<_>>(),
        });
        let ok = m.dim() + m.codim() == self.rep.carrier_dim() && asym <= tol.sym && fd_error <= 1e-6;
        Ok((ok, data))
    }

    fn holonomy_analysis(&self, rng: &mut ProbeRng) -> Outcome {
        let m = &self.orbit;
        let verdict = analyze(m, self.cfg.probes, rng)?;
        let curv = AdaptedCurvature::of_orbit(m);
        let slice = self.rep.slice_representation_in_frame(m.point(), m.normal().basis())?;
        let slice_distance = verdict.algebra.distance(&slice);
        let symmetry_defect = curv.symmetry_defect();
        let bridge = if m.dim() >= 2 && m.normal_bar().dim() > 0 { bridge_check(m).ok() } else { None };
        let data = json!({
            "verdict": to_value(&verdict.summary()),
            "curvature_norm": curv.norm(),
            "curvature_symmetry_defect": symmetry_defect,
            "closure_defect": verdict.algebra.closure_defect(),
            "slice_distance": slice_distance,
            "bridge": bridge.as_ref().map(to_value),
        });
        let ok = symmetry_defect <= 1e-8 * curv.norm().max(1.0) && slice_distance <= 1e-7;
        Ok((ok, data))
    }

    fn bound_analysis(&self, rng: &mut ProbeRng) -> Outcome {
        let m = &self.orbit;
        let verdict = analyze(m, self.cfg.probes, rng)?;
        let cert = commuting_certificate(m, &verdict, 1e-8)?;
        let data = json!({
            "factor_count": verdict.factor_count,
            "factor_dims": verdict.decomposition.factor_dims(),
            "orbit_dim": verdict.orbit_dim,
            "bound": verdict.bound,
            "bound_satisfied": verdict.bound_satisfied,
            "bound_attained": verdict.factor_count == verdict.bound,
            "certificate": to_value(&cert),
        });
        Ok((verdict.bound_satisfied && cert.certified(1e-8), data))
    }

    fn tube_analysis(&self, rng: &mut ProbeRng) -> Outcome {
        let m = &self.orbit;
        let p = &self.cfg.tube;
        let dir = choose_tube_direction(m)?;
        let xi = dir.vector();
        let cmp = compare_tube_spectra(m, &xi, &self.curve, p)?;
        let m1 = cmp.direct.clusters.first().map(|c| c.multiplicity).unwrap_or(0);
        let dupin = match dupin_check(m, &xi, &self.curve, p, 3, rng) {
            Ok(d) => Some(d),
            Err(Error::NotApplicable(_)) => None,
            Err(e) => return Err(e),
        };
        let caustic = caustic_rank_check(m, &xi, &self.curve, p)?;
        let nexp = normal_exponential_differential(m, &xi)?;
        let dupin_ok = dupin.as_ref().is_none_or(|d| d.max_derivative_lambda1 <= 1e-4 && d.max_derivative_lambda2 <= 1e-4);
        let ok = cmp.max_gap <= 1e-4
            && cmp.vertical_error <= 1e-4
            && cmp.multiplicities_consistent
            && dupin_ok
            && caustic.kernel_dim == m1
            && caustic.kernel_angle_to_e1 <= 1e-3
            && nexp.min_singular_value >= TUBE_SAFETY - 1e-12
            && nexp.fd_error <= 1e-6;
        let data = json!({
            "direction": to_value(&dir),
            "comparison": to_value(&cmp),
            "dupin": dupin.as_ref().map(to_value),
            "caustic": to_value(&caustic),
            "normal_exponential": to_value(&nexp),
        });
        Ok((ok, data))
    }

    fn coxeter_analysis(&self, rng: &mut ProbeRng) -> Outcome {
        let m = &self.orbit;
        let normals = curvature_normals(m, rng)?;
        let group = reflection_group(&normals, DEFAULT_GROUP_CAP)?;
        let permuting = group.elements.iter().filter(|g| hyperplane_permutation_check(g, &normals, 1e-6)).count();
        let singular = hyperplane_point_tests(m, &normals, 3, rng)?;
        let ok = group.closure_verified != Some(false)
            && group.orthogonality_defect <= 1e-10
            && permuting == group.order
            && singular.iter().all(|s| s.dropped);
        let data = json!({
            "normals": to_value(&normals),
            "max_pairwise_cosine": normals.max_pairwise_cosine(),
            "group": to_value(&group),
            "elements_permuting_hyperplanes": permuting,
            "singular_points": to_value(&singular),
        });
        Ok((ok, data))
    }

    fn veronese_analysis(&self, rng: &mut ProbeRng) -> Outcome {
        let [r] = self.rep.blocks() else {
            return Err(Error::NotApplicable("Veronese facts need a single sl-so block".into()));
        };
        let n = r - 1;
        let facts = verify_veronese_facts(n, self.cfg.probes, rng)?;
        let identities = veronese_identities(n, 5, rng)?;
        let iso = isometry_check(n, 3, rng)?;
        let cong = congruence_check(n, 20, rng)?;
        let scan = minimal_dimension_scan(*r)?;
        let ok = facts.passed
            && identities.equivariance_error <= 1e-10
            && iso.half_trace_error <= 1e-8
            && (iso.trace_ratio - 2f64.sqrt()).abs() <= 1e-8
            && cong.max_distance <= 1e-7
            && scan.all_match;
        let data = json!({
            "facts": to_value(&facts),
            "identities": to_value(&identities),
            "isometry": to_value(&iso),
            "congruence": to_value(&cong),
            "dimension_scan": to_value(&scan),
        });
        Ok((ok, data))
    }

    fn transport_analysis(&self, rng: &mut ProbeRng) -> Outcome {
        let m = &self.orbit;
        let curve = if self.curve.segments.is_empty() {
            OrbitCurve::random(&self.rep, 3, 0.3, rng)
        } else {
            self.curve.clone()
        };
        let (_, audit) = transport_audit(&self.rep, &curve, m.point(), m.normal().basis(), self.cfg.transport_step)?;
        let drift = if m.normal_bar().dim() > 0 {
            let xi0 = m.normal_bar().embed(&unit_vector(rng, m.normal_bar().dim()));
            Some(transported_spectrum_drift(m, &curve, &xi0, self.cfg.transport_step, 4)?)
        } else {
            None
        };
        let algebra = crate::holonomy::holonomy_algebra(m)?;
        let probe = loop_holonomy_probe(m, &algebra, 0.05, 4, 1e-4, rng)?;
        let ok = audit.halving_ok
            && audit.norm_error <= 1e-8
            && audit.exact_error <= 1e-6
            && drift.as_ref().is_none_or(|d| d.max_drift <= 1e-5)
            && probe.max_containment <= 1e-4
            && probe.span.dim() == algebra.dim();
        let data = json!({
            "audit": to_value(&audit),
            "spectrum_drift": drift.as_ref().map(to_value),
            "loop_probe": {
                "loops": probe.logs.len(),
                "span_dim": probe.span.dim(),
                "algebra_dim": algebra.dim(),
                "max_containment": probe.max_containment,
            },
        });
        Ok((ok, data))
    }
}

/// Runs the requested analyses in dependency order. Each failure is recorded
/// in its own entry; sibling analyses still run.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Report> {
    cfg.validate()?;
    let rep = parse_representation(&cfg.representation)?.with_rank_tol(cfg.tolerances.rank);
    let point = parse_point(&rep, &cfg.point)?;
    let curve = build_curve(&rep, &cfg.curve)?;
    let mut analyses = cfg.analyses.clone();
    analyses.sort();
    analyses.dedup();

    let mut results = BTreeMap::new();
    let mut timings_ms = BTreeMap::new();
    let start = Instant::now();
    let orbit = build_orbit(&rep, &point);
    timings_ms.insert("build_orbit".to_string(), start.elapsed().as_secs_f64() * 1e3);
    match orbit {
        Ok(orbit) => {
            let ctx = Context { cfg: cfg.clone(), rep, orbit, curve };
            for a in &analyses {
                let t = Instant::now();
                let outcome = match ctx.run(*a) {
                    Ok((ok, data)) => {
                        AnalysisOutcome { status: if ok { Status::Pass } else { Status::Fail }, data, error: None }
                    }
                    Err(e) => AnalysisOutcome { status: Status::Error, data: Value::Null, error: Some(e.to_string()) },
                };
                timings_ms.insert(a.name().to_string(), t.elapsed().as_secs_f64() * 1e3);
                results.insert(a.name().to_string(), outcome);
            }
        }
        Err(e) => {
            for a in &analyses {
                results.insert(
                    a.name().to_string(),
                    AnalysisOutcome { status: Status::Error, data: Value::Null, error: Some(format!("orbit: {e}")) },
                );
            }
        }
    }
    let failed = results.iter().filter(|(_, o)| o.status == Status::Fail).map(|(k, _)| k.clone()).collect::<Vec<_>>();
    let errored = results.iter().filter(|(_, o)| o.status == Status::Error).map(|(k, _)| k.clone()).collect::<Vec<_>>();
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        config: cfg.clone(),
        summary: Summary { passed: failed.is_empty() && errored.is_empty(), requested: analyses.len(), failed, errored },
        results,
        timings_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_unknown_keys() {
        let mut cfg = ScenarioConfig::new("sl-so:4", "veronese", vec![Analysis::Holonomy, Analysis::Tube], 3);
        cfg.curve.push(CurveStep { generator: Some(1), matrix: None, t: 0.25 });
        let back = ScenarioConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        let bad = r#"{"representation": "sl-so:3", "point": "veronese", "colour": 1}"#;
        assert!(matches!(ScenarioConfig::from_json(bad), Err(Error::Config(_))));
        let bad_tol = r#"{"representation": "sl-so:3", "point": "veronese", "tolerances": {"rnak": 1}}"#;
        assert!(ScenarioConfig::from_json(bad_tol).is_err());
    }

    #[test]
    fn representation_and_points() {
        let rep = parse_representation("product:sl-so:3,sl-so:3").unwrap();
        assert_eq!(rep.blocks(), &[3, 3]);
        assert_eq!(split_top_level("diag:[1,-1],veronese"), vec!["diag:[1,-1]", "veronese"]);
        let rep2 = parse_representation("sl-so:2").unwrap();
        assert!(parse_point(&rep2, "diag:[1, -1]").is_ok());
        assert!(parse_point(&rep, "veronese").is_err());
        let p = parse_point(&rep, "veronese,random-regular:5").unwrap();
        assert_eq!(p.len(), 10);
        assert!(parse_point(&rep2, "matrix:[[1, 0], [0, 2]]").is_err());
        assert!(parse_representation("su:3").is_err());
    }

    #[test]
    fn seventeen_digits() {
        let s = to_json_17(&json!({"x": 0.1, "n": 3, "nan": f64::NAN}));
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"n\": 3"));
        assert!(s.contains("\"nan\": null"));
    }

    #[test]
    fn empty_analysis_list() {
        let cfg = ScenarioConfig::new("sl-so:3", "veronese", vec![], 0);
        let r = run_scenario(&cfg).unwrap();
        assert!(r.passed());
        assert!(r.results.is_empty());
    }

    #[test]
    fn v3_holonomy_scenario() {
        let cfg = ScenarioConfig::new("sl-so:4", "veronese", vec![Analysis::Holonomy, Analysis::Orbit], 1);
        let r = run_scenario(&cfg).unwrap();
        assert!(r.passed(), "{}", r.body_json());
        let v = &r.results["holonomy"].data["verdict"];
        assert_eq!(v["factor_count"], 1);
        assert_eq!(v["holonomy_fixed_rank"], 1);
        assert_eq!(v["factor_transitive"][0], false);
        assert_eq!(r.body_json(), run_scenario(&cfg).unwrap().body_json());
    }

    #[test]
    fn errors_do_not_abort_siblings() {
        let cfg = ScenarioConfig::new("sl-so:4", "veronese", vec![Analysis::Coxeter, Analysis::Bound], 1);
        let r = run_scenario(&cfg).unwrap();
        assert_eq!(r.results["coxeter"].status, Status::Error);
        assert_eq!(r.results["bound"].status, Status::Pass);
        assert!(!r.passed());
        assert_eq!(r.summary.errored, vec!["coxeter".to_string()]);
    }
}
