use std::collections::BTreeMap;
use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};
use serde_json::{json, Map, Value};

use super::bootstrap::BootstrapReport;
use super::inequality::CorpusConstant;

/// How the Littlewood–Paley pieces are built; carried in every report.
pub const LP_PARTITION_NOTE: &str =
    "telescoping partition P_k = U(4^-(k+1)) - U(4^-k), P_<0 = U(1); sums exactly to the identity";

/// Everything computed for one run, grouped in named sections.
///
/// Sections and keys are kept sorted so the JSON form is byte-stable.
#[derive(Debug, Clone, PartialEq)]
pub struct NormReport {
    sections: BTreeMap<String, Map<String, Value>>,
}

impl Default for NormReport {
    fn default() -> Self {
        Self::new()
    }
}

/// A JSON value for a real; non-finite values become `null`.
pub fn real(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

impl NormReport {
    pub fn new() -> Self {
        let mut r = Self { sections: BTreeMap::new() };
        r.set("meta", "lp_partition", Value::from(LP_PARTITION_NOTE));
        r
    }

    pub fn set(&mut self, section: &str, key: &str, value: Value) {
        self.sections.entry(section.to_string()).or_default().insert(key.to_string(), value);
    }

    pub fn set_real(&mut self, section: &str, key: &str, x: f64) {
        self.set(section, key, real(x));
    }

    pub fn section(&self, name: &str) -> Option<&Map<String, Value>> {
        self.sections.get(name)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Value> {
        self.sections.get(section)?.get(key)
    }

    /// Adds the BA flags, margins and first failures under `bootstrap`.
    pub fn add_bootstrap(&mut self, b: &BootstrapReport) {
        self.set_real("bootstrap", "delta0", b.delta0);
        self.set("bootstrap", "all_pass", Value::from(b.all_pass()));
        let first = b.first_failure().map(|(n, s)| json!({ "name": n, "s": real(s) }));
        self.set("bootstrap", "first_failure", first.unwrap_or(Value::Null));
        for f in &b.flags {
            let terms: Map<String, Value> = f.terms.iter().map(|t| (t.label.clone(), real(t.value()))).collect();
            let v = json!({
                "bound": real(f.bound),
                "lhs": real(f.lhs),
                "margin": real(f.margin),
                "pass": f.pass,
                "first_failure_s": f.first_failure.map(real).unwrap_or(Value::Null),
                "terms": terms,
            });
            self.set("bootstrap", f.name, v);
        }
    }

    pub fn add_corpus_constant(&mut self, c: &CorpusConstant) {
        self.set("inequalities", &format!("{}_corpus_max", c.which), real(c.max_ratio));
        self.set("inequalities", &format!("{}_corpus_argmax", c.which), Value::from(c.argmax));
    }

    pub fn to_value(&self) -> Value {
        Value::Object(self.sections.iter().map(|(k, v)| (k.clone(), Value::Object(v.clone()))).collect())
    }

    /// Compact JSON with sorted keys, every real printed with 17 significant
    /// digits, and a trailing newline.
    pub fn to_json(&self) -> String {
        let mut out = Vec::new();
        let mut ser = Serializer::with_formatter(&mut out, SigDigits17);
        self.to_value().serialize(&mut ser).expect("serializing into memory cannot fail");
        out.push(b'\n');
        String::from_utf8(out).expect("JSON output is UTF-8")
    }
}

/// Compact JSON writing reals as `d.dddddddddddddddde±x`.
struct SigDigits17;

impl Formatter for SigDigits17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{}", format_real(value))
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

/// A real with 17 significant digits in scientific form, `.` decimal.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}
