//! JSON schemas for matrices, maps and reports, plus DOT and CSV export.
//! Node indices are 1-based in every external format.

use serde::ser::Serialize;
use serde::{Deserialize, Serialize as SerializeDerive};
use serde_json::ser::Formatter;

use crate::dynamics::{GlobalReport, OrbitRecord, PeriodReport, PowerIdentity};
use crate::error::{Error, Result};
use crate::fixed_points::FixedPointReport;
use crate::homogeneous::{Certification, WeightedNorm};
use crate::map_model::{AffineTerm, ExpTerm, MapRows, MapSpec};
use crate::nonneg_matrix::{Digraph, NonnegMatrix, NormalForm, Verification};

/// Writes every float with 17 significant digits.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactFloats;

impl Formatter for ExactFloats {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        if value.is_finite() {
            write!(writer, "{}", fmt_f64(value))
        } else {
            writer.write_all(b"null")
        }
    }
}

pub fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}

/// Serializes to a single line of JSON followed by a newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, ExactFloats);
    value.serialize(&mut ser).expect("report types serialize");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json writes UTF-8")
}

fn schema<E: std::fmt::Display>(e: E) -> Error {
    Error::Schema(e.to_string())
}

fn one_based(nodes: &[usize]) -> Vec<usize> {
    nodes.iter().map(|i| i + 1).collect()
}

fn arcs_one_based(g: &Digraph) -> Vec<[usize; 2]> {
    g.arcs().into_iter().map(|(i, j)| [i + 1, j + 1]).collect()
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub n: usize,
    pub entries: Vec<Vec<f64>>,
}

pub fn parse_matrix(text: &str) -> Result<NonnegMatrix> {
    let m: MatrixJson = serde_json::from_str(text).map_err(schema)?;
    if m.entries.len() != m.n {
        return Err(Error::Schema(format!("expected {} rows, found {}", m.n, m.entries.len())));
    }
    NonnegMatrix::new(m.entries).map_err(schema)
}

pub fn matrix_json(p: &NonnegMatrix) -> MatrixJson {
    MatrixJson { n: p.n(), entries: p.rows() }
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
#[serde(untagged)]
pub enum TermJson {
    Affine { r: f64, p: Vec<f64> },
    Exp { a: f64, j: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapJson {
    pub n: usize,
    pub kind: String,
    pub rows: Vec<Vec<TermJson>>,
}

pub fn parse_map(text: &str) -> Result<MapSpec> {
    let m: MapJson = serde_json::from_str(text).map_err(schema)?;
    if m.rows.len() != m.n {
        return Err(Error::Schema(format!("expected {} rows, found {}", m.n, m.rows.len())));
    }
    let wrong = |i: usize| Error::Schema(format!("row {} has a term of the wrong kind", i + 1));
    match m.kind.as_str() {
        "max_affine" => {
            let mut rows = Vec::with_capacity(m.n);
            for (i, row) in m.rows.into_iter().enumerate() {
                let terms = row
                    .into_iter()
                    .map(|t| match t {
                        TermJson::Affine { r, p } => Ok(AffineTerm { r, p }),
                        TermJson::Exp { .. } => Err(wrong(i)),
                    })
                    .collect::<Result<Vec<_>>>()?;
                rows.push(terms);
            }
            MapSpec::max_affine(m.n, rows).map_err(schema)
        }
        "log_exp" => {
            let mut rows = Vec::with_capacity(m.n);
            for (i, row) in m.rows.into_iter().enumerate() {
                let terms = row
                    .into_iter()
                    .map(|t| match t {
                        TermJson::Exp { a, j } => Ok(ExpTerm { a, j }),
                        TermJson::Affine { .. } => Err(wrong(i)),
                    })
                    .collect::<Result<Vec<_>>>()?;
                rows.push(terms);
            }
            MapSpec::log_exp(m.n, rows).map_err(schema)
        }
        other => Err(Error::Schema(format!("unknown kind {other:?}"))),
    }
}

pub fn map_json(f: &MapSpec) -> MapJson {
    let (kind, rows) = match f.rows() {
        MapRows::MaxAffine(rows) => (
            "max_affine",
            rows.iter()
                .map(|row| row.iter().map(|t| TermJson::Affine { r: t.r, p: t.p.clone() }).collect())
                .collect(),
        ),
        MapRows::LogExp(rows) => (
            "log_exp",
            rows.iter()
                .map(|row| row.iter().map(|t| TermJson::Exp { a: t.a, j: t.j.clone() }).collect())
                .collect(),
        ),
    };
    MapJson { n: f.n(), kind: kind.into(), rows }
}

/// Comma-separated list of numbers.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Schema(format!("bad number {s:?}: {e}"))))
        .collect()
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StableReport {
    pub stable: bool,
    pub spectral_radius: f64,
    pub critical_classes: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NormalFormJson {
    #[serde(rename = "U")]
    pub u: Vec<usize>,
    #[serde(rename = "C")]
    pub c: Vec<usize>,
    #[serde(rename = "D")]
    pub d: Vec<usize>,
    #[serde(rename = "I")]
    pub i: Vec<usize>,
    pub critical_classes: Vec<Vec<usize>>,
    pub permutation: Vec<usize>,
}

impl From<&NormalForm> for NormalFormJson {
    fn from(nf: &NormalForm) -> Self {
        NormalFormJson {
            u: one_based(&nf.u),
            c: one_based(&nf.c),
            d: one_based(&nf.d),
            i: one_based(&nf.i),
            critical_classes: nf.critical_classes.iter().map(|c| one_based(c)).collect(),
            permutation: one_based(&nf.permutation),
        }
    }
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GraphReport {
    pub critical_nodes: Vec<usize>,
    pub arcs: Vec<[usize; 2]>,
    pub cyclicity: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<String>,
}

impl GraphReport {
    pub fn new(nodes: &[usize], g: &Digraph, cyclicity: u64, verification: Option<&Verification>) -> Self {
        GraphReport {
            critical_nodes: one_based(nodes),
            arcs: arcs_one_based(g),
            cyclicity,
            verification: verification.map(verification_str),
        }
    }
}

fn verification_str(v: &Verification) -> String {
    match v {
        Verification::Exhaustive => "exhaustive".into(),
        Verification::Partial { sampled } => format!("partial ({sampled} sampled)"),
    }
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
pub struct CyclicityReport {
    pub cyclicity: u64,
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
pub struct NormJson {
    pub v: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<usize>,
    #[serde(rename = "B")]
    pub b: Vec<usize>,
    pub alpha: f64,
    pub verified_pairs: usize,
}

impl From<&WeightedNorm> for NormJson {
    fn from(w: &WeightedNorm) -> Self {
        NormJson { v: w.v.clone(), a: one_based(&w.a), b: one_based(&w.b), alpha: w.alpha, verified_pairs: w.verified_pairs }
    }
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CertifyReport {
    pub outcome: String,
    #[serde(default)]
    pub norm: Option<NormJson>,
    /// 1-based generator index per row.
    #[serde(default)]
    pub unstable_selection: Option<Vec<usize>>,
    #[serde(default)]
    pub detail: Option<String>,
}

impl From<&Certification> for CertifyReport {
    fn from(c: &Certification) -> Self {
        CertifyReport {
            outcome: c.outcome.as_str().into(),
            norm: c.norm.as_ref().map(NormJson::from),
            unstable_selection: c.unstable_selection.as_deref().map(one_based),
            detail: c.detail.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OrbitJson {
    pub start: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub status: String,
    pub step_tol: f64,
}

impl From<&OrbitRecord> for OrbitJson {
    fn from(o: &OrbitRecord) -> Self {
        OrbitJson { start: o.start.clone(), states: o.states.clone(), status: o.status.as_str().into(), step_tol: o.step_tol }
    }
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PeriodJson {
    pub period: usize,
    pub orbit_points: Vec<Vec<f64>>,
    pub residual: f64,
    #[serde(default)]
    pub cyclicity: Option<u64>,
    #[serde(default)]
    pub divides: Option<bool>,
}

impl From<&PeriodReport> for PeriodJson {
    fn from(p: &PeriodReport) -> Self {
        PeriodJson {
            period: p.period,
            orbit_points: p.orbit_points.clone(),
            residual: p.residual,
            cyclicity: p.cyclicity,
            divides: p.divides,
        }
    }
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FixedPointJson {
    pub point: Vec<f64>,
    pub residual: f64,
    pub tstable: String,
    pub critical_nodes: Vec<usize>,
    #[serde(default)]
    pub critical_graph: Option<Vec<[usize; 2]>>,
    #[serde(default)]
    pub cyclicity: Option<u64>,
}

impl From<&FixedPointReport> for FixedPointJson {
    fn from(r: &FixedPointReport) -> Self {
        FixedPointJson {
            point: r.point.clone(),
            residual: r.residual,
            tstable: r.tstable.as_str().into(),
            critical_nodes: one_based(&r.critical_nodes),
            critical_graph: r.critical_graph.as_ref().map(arcs_one_based),
            cyclicity: r.cyclicity,
        }
    }
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
pub struct MeetReport {
    pub meet: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PowerIdentityJson {
    pub k: usize,
    pub holds: bool,
    pub lhs: Vec<[usize; 2]>,
    pub rhs: Vec<[usize; 2]>,
    pub verification: String,
}

impl From<&PowerIdentity> for PowerIdentityJson {
    fn from(p: &PowerIdentity) -> Self {
        PowerIdentityJson {
            k: p.k,
            holds: p.holds,
            lhs: arcs_one_based(&p.lhs),
            rhs: arcs_one_based(&p.rhs),
            verification: verification_str(&p.verification),
        }
    }
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GlobalJson {
    pub certified: bool,
    pub outcome: String,
    #[serde(default)]
    pub cyclicity: Option<u64>,
    #[serde(default)]
    pub norm: Option<NormJson>,
    #[serde(default)]
    pub max_expansion: Option<f64>,
    #[serde(default)]
    pub fixed_point: Option<Vec<f64>>,
    pub conclusion: String,
}

impl From<&GlobalReport> for GlobalJson {
    fn from(g: &GlobalReport) -> Self {
        GlobalJson {
            certified: g.certified(),
            outcome: g.outcome.as_str().into(),
            cyclicity: g.cyclicity,
            norm: g.norm.as_ref().map(NormJson::from),
            max_expansion: g.max_expansion,
            fixed_point: g.fixed_point.clone(),
            conclusion: g.conclusion.clone(),
        }
    }
}

/// DOT digraph with nodes labelled 1..n. `classes` gives a label per node:
/// 0 upstream, 1 critical, 2 downstream, 3 independent.
pub fn dot(g: &Digraph, critical: &[usize], classes: Option<&[u8]>) -> String {
    const COLORS: [&str; 4] = ["lightblue", "salmon", "palegreen", "lightgray"];
    const NAMES: [&str; 4] = ["U", "C", "D", "I"];
    let mut out = String::from("digraph G {\n");
    for i in 0..g.n() {
        let mut attrs = Vec::new();
        if let Some(labels) = classes {
            let k = labels[i] as usize;
            attrs.push(format!("style=filled, fillcolor={}, xlabel=\"{}\"", COLORS[k], NAMES[k]));
        }
        if critical.contains(&i) {
            attrs.push("shape=doublecircle, penwidth=2".into());
        }
        if attrs.is_empty() {
            out.push_str(&format!("  {};\n", i + 1));
        } else {
            out.push_str(&format!("  {} [{}];\n", i + 1, attrs.join(", ")));
        }
    }
    for (i, j) in g.arcs() {
        out.push_str(&format!("  {} -> {};\n", i + 1, j + 1));
    }
    out.push_str("}\n");
    out
}

/// One row per step: `step,x1,...,xn`.
pub fn trajectory_csv(states: &[Vec<f64>]) -> String {
    let n = states.first().map_or(0, Vec::len);
    let mut out = String::from("step");
    for i in 1..=n {
        out.push_str(&format!(",x{i}"));
    }
    out.push('\n');
    for (k, x) in states.iter().enumerate() {
        out.push_str(&k.to_string());
        for v in x {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip() {
        let p = parse_matrix(r#"{"n":2,"entries":[[1,1],[0,1]]}"#).unwrap();
        assert_eq!(p.get(0, 1), 1.0);
        let text = to_json(&matrix_json(&p));
        assert_eq!(parse_matrix(&text).unwrap(), p);
    }

    #[test]
    fn matrix_schema_errors() {
        for bad in [
            r#"{"n":2,"entries":[[1,-1],[0,1]]}"#,
            r#"{"n":2,"entries":[[1,1]]}"#,
            r#"{"n":1,"entries":[[1,1]]}"#,
            r#"{"entries":[[1]]}"#,
            r#"{"n":1,"entries":[[1]],"extra":0}"#,
            "not json",
        ] {
            assert!(matches!(parse_matrix(bad), Err(Error::Schema(_))), "{bad}");
        }
    }

    #[test]
    fn map_round_trip() {
        let text = r#"{"n":1,"kind":"max_affine","rows":[[{"r":0,"p":[0]},{"r":0,"p":[2]}]]}"#;
        let f = parse_map(text).unwrap();
        assert_eq!(f.eval(&[1.5]), vec![3.0]);
        assert_eq!(parse_map(&to_json(&map_json(&f))).unwrap(), f);
        let text = r#"{"n":2,"kind":"log_exp","rows":[[{"a":1,"j":[1,0]},{"a":1,"j":[0,1]}],[{"a":1,"j":[0,1]}]]}"#;
        let f = parse_map(text).unwrap();
        assert_eq!(parse_map(&to_json(&map_json(&f))).unwrap(), f);
    }

    #[test]
    fn map_schema_errors() {
        for bad in [
            r#"{"n":1,"kind":"max_affine","rows":[[{"r":0,"p":[-1]}]]}"#,
            r#"{"n":1,"kind":"log_exp","rows":[[{"a":0,"j":[1]}]]}"#,
            r#"{"n":1,"kind":"log_exp","rows":[[{"r":0,"p":[1]}]]}"#,
            r#"{"n":1,"kind":"tropical","rows":[[{"r":0,"p":[1]}]]}"#,
            r#"{"n":2,"kind":"max_affine","rows":[[{"r":0,"p":[1]}]]}"#,
        ] {
            assert!(matches!(parse_map(bad), Err(Error::Schema(_))), "{bad}");
        }
    }

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(to_json(&vec![0.1f64]), "[1.0000000000000001e-1]\n");
        let back: Vec<f64> = serde_json::from_str(&to_json(&vec![1.0 / 3.0, -2.5e-300])).unwrap();
        assert_eq!(back, vec![1.0 / 3.0, -2.5e-300]);
        assert_eq!(to_json(&vec![f64::NAN]), "[null]\n");
    }

    #[test]
    fn dot_and_csv() {
        let g = Digraph::from_arcs(2, [(0, 1), (1, 1)]);
        let d = dot(&g, &[1], Some(&[0, 1]));
        assert!(d.contains("1 -> 2;"));
        assert!(d.contains("2 [style=filled, fillcolor=salmon"));
        let csv = trajectory_csv(&[vec![1.0, 2.0], vec![0.5, 0.25]]);
        assert_eq!(csv.lines().next(), Some("step,x1,x2"));
        assert_eq!(csv.lines().count(), 3);
    }
}
