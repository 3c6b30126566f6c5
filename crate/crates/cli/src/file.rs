//! JSON instance and solution files.

use std::path::Path;

use dex_core::field::make_field;
use dex_core::rational::{format_rational, parse_rational};
use dex_core::source::SourceKind;
use dex_core::{EntropyTable, FieldMatrix, FieldSpec, Instance, LinearSource, Rational, SourceModel, TerminalSet};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct FieldEntry {
    pub characteristic: u64,
    #[serde(default = "one")]
    pub degree: u32,
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TerminalEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<u64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packets: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packet_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terminals: Vec<TerminalEntry>,
    /// `2^m` entropies indexed by bitmask (terminal 0 is the lowest bit).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy_table: Option<Vec<Value>>,
    pub users: Vec<usize>,
    /// Rationals as `"p/q"` strings or JSON numbers; unit weights if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmitters: Option<Vec<usize>>,
}

/// Replaces the field declared in the file.
#[derive(Clone, Copy, Debug, Default)]
pub struct FieldOverride {
    pub characteristic: Option<u64>,
    pub degree: Option<u32>,
}

pub fn rational_value(v: &Value, what: &str) -> Result<Rational, CliError> {
    let text = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        _ => return Err(CliError::Input(format!("{what}: expected a number or \"p/q\" string"))),
    };
    parse_rational(&text).map_err(|e| CliError::Input(format!("{what}: {e}")))
}

pub fn rational_json(r: &Rational) -> Value {
    Value::String(format_rational(r))
}

enum Form {
    Matrix,
    Packets,
    Table,
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| CliError::Input(format!("malformed instance: {e}")))?;
        if file.format_version != FORMAT_VERSION {
            return Err(CliError::Input(format!(
                "format_version {} is not supported (expected {FORMAT_VERSION})",
                file.format_version
            )));
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn names(&self) -> Vec<String> {
        let m = self.terminal_count().unwrap_or(0);
        (0..m)
            .map(|i| {
                self.terminals
                    .get(i)
                    .and_then(|t| t.name.clone())
                    .unwrap_or_else(|| format!("t{i}"))
            })
            .collect()
    }

    fn terminal_count(&self) -> Result<usize, CliError> {
        match &self.entropy_table {
            Some(t) => {
                let m = t.len().trailing_zeros() as usize;
                if t.len() < 2 || t.len() != 1 << m {
                    return Err(CliError::Input(format!(
                        "entropy_table: length {} is not a power of two",
                        t.len()
                    )));
                }
                Ok(m)
            }
            None => Ok(self.terminals.len()),
        }
    }

    fn form(&self) -> Result<Form, CliError> {
        let has_matrix = self.terminals.iter().any(|t| t.matrix.is_some());
        let has_packets = self.terminals.iter().any(|t| t.packets.is_some());
        let has_table = self.entropy_table.is_some();
        match (has_matrix, has_packets, has_table) {
            (true, false, false) => Ok(Form::Matrix),
            (false, true, false) => Ok(Form::Packets),
            (false, false, true) => Ok(Form::Table),
            (false, false, false) => Err(CliError::Input(
                "instance needs terminal matrices, terminal packets or an entropy_table".into(),
            )),
            _ => Err(CliError::Input(
                "use exactly one of terminal matrices, terminal packets or entropy_table".into(),
            )),
        }
    }

    fn field_spec(&self, over: FieldOverride) -> Result<FieldSpec, CliError> {
        let declared = self.field.as_ref();
        let p = over
            .characteristic
            .or(declared.map(|f| f.characteristic))
            .ok_or_else(|| CliError::Input("field: missing characteristic".into()))?;
        let d = over.degree.or(declared.map(|f| f.degree)).unwrap_or(1);
        make_field(p, d).map_err(|e| CliError::Input(format!("field: {e}")))
    }

    pub fn to_model(&self, over: FieldOverride) -> Result<SourceModel, CliError> {
        let form = self.form()?;
        if matches!(form, Form::Table) {
            if over.characteristic.is_some() || over.degree.is_some() {
                return Err(CliError::Input("field overrides do not apply to an entropy_table".into()));
            }
            let m = self.terminal_count()?;
            if !self.terminals.is_empty() && self.terminals.len() != m {
                return Err(CliError::Input(format!(
                    "terminals: {} entries but entropy_table describes {m}",
                    self.terminals.len()
                )));
            }
            let values = self
                .entropy_table
                .as_ref()
                .expect("table form")
                .iter()
                .enumerate()
                .map(|(i, v)| rational_value(v, &format!("entropy_table[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            return SourceModel::tabular(EntropyTable::from_values(m, values))
                .map_err(|e| CliError::Input(format!("entropy_table: {e}")));
        }
        let field = self.field_spec(over)?;
        let n = self
            .packet_count
            .ok_or_else(|| CliError::Input("packet_count: missing".into()))?;
        match form {
            Form::Packets => {
                let ownership = self
                    .terminals
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        t.packets
                            .clone()
                            .ok_or_else(|| CliError::Input(format!("terminals[{i}]: missing packets")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                SourceModel::raw(&field, ownership, n).map_err(|e| CliError::Input(format!("terminals: {e}")))
            }
            _ => {
                let mats = self
                    .terminals
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        let rows = t
                            .matrix
                            .as_ref()
                            .ok_or_else(|| CliError::Input(format!("terminals[{i}]: missing matrix")))?;
                        FieldMatrix::from_rows(&field, n, rows)
                            .map_err(|e| CliError::Input(format!("terminals[{i}].matrix: {e}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let src = LinearSource::new(&field, n, mats).map_err(|e| CliError::Input(e.to_string()))?;
                SourceModel::linear(src).map_err(|e| CliError::Input(e.to_string()))
            }
        }
    }

    pub fn to_instance(&self, over: FieldOverride) -> Result<Instance, CliError> {
        let model = self.to_model(over)?;
        let m = model.terminal_count();
        let check = |ix: &[usize], what: &str| -> Result<TerminalSet, CliError> {
            if let Some(&bad) = ix.iter().find(|&&i| i >= m) {
                return Err(CliError::Input(format!("{what}: index {bad} out of range 0..{m}")));
            }
            Ok(TerminalSet::from_indices(ix.iter().copied()))
        };
        let users = check(&self.users, "users")?;
        let transmitters = self
            .transmitters
            .as_ref()
            .map(|t| check(t, "transmitters"))
            .transpose()?;
        let weights = match &self.weights {
            Some(w) => w
                .iter()
                .enumerate()
                .map(|(i, v)| rational_value(v, &format!("weights[{i}]")))
                .collect::<Result<Vec<_>, _>>()?,
            None => vec![Rational::from_integer(1.into()); m],
        };
        Instance::new(model, users, weights, transmitters).map_err(|e| match e {
            dex_core::DexError::Infeasible(msg) => CliError::Failed(msg),
            other => CliError::Input(other.to_string()),
        })
    }

    /// File describing `instance`; `names` label the terminals.
    pub fn from_instance(instance: &Instance, names: &[String]) -> Self {
        let model = instance.model();
        let m = model.terminal_count();
        let name = |i: usize| names.get(i).cloned();
        let field_entry = |f: &FieldSpec| FieldEntry {
            characteristic: f.characteristic(),
            degree: f.degree(),
        };
        let (field, packet_count, terminals, entropy_table) = match model.kind() {
            SourceKind::Linear(src) => (
                Some(field_entry(src.field())),
                Some(src.packet_count()),
                src.matrices()
                    .iter()
                    .enumerate()
                    .map(|(i, a)| TerminalEntry {
                        name: name(i),
                        matrix: Some(a.row_vecs()),
                        packets: None,
                    })
                    .collect(),
                None,
            ),
            SourceKind::Raw { ownership, linear } => (
                Some(field_entry(linear.field())),
                Some(linear.packet_count()),
                ownership
                    .iter()
                    .enumerate()
                    .map(|(i, p)| TerminalEntry {
                        name: name(i),
                        matrix: None,
                        packets: Some(p.clone()),
                    })
                    .collect(),
                None,
            ),
            SourceKind::Tabular(table) => (
                None,
                None,
                (0..m)
                    .filter_map(name)
                    .map(|n| TerminalEntry {
                        name: Some(n),
                        matrix: None,
                        packets: None,
                    })
                    .collect(),
                Some(table.values().iter().map(rational_json).collect()),
            ),
        };
        let transmitters = (instance.transmitters() != model.all()).then(|| instance.transmitters().iter().collect());
        InstanceFile {
            format_version: FORMAT_VERSION,
            field,
            packet_count,
            terminals,
            entropy_table,
            users: instance.user_list(),
            weights: Some(instance.weights().iter().map(rational_json).collect()),
            transmitters,
        }
    }
}

pub fn read_instance_file(path: &Path) -> Result<InstanceFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    InstanceFile::from_json(&text).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_instance(path: &Path, over: FieldOverride) -> Result<Instance, CliError> {
    read_instance_file(path)?.to_instance(over)
}

/// Output of `solve`, also accepted as a rate source by other commands.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolutionRecord {
    pub format_version: u32,
    pub rates: Vec<Value>,
    pub objective: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual_objective: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    /// Decimal rendering of `objective` for quick reading.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective_approx: Option<f64>,
}

impl SolutionRecord {
    pub fn rates(&self) -> Result<Vec<Rational>, CliError> {
        self.rates
            .iter()
            .enumerate()
            .map(|(i, v)| rational_value(v, &format!("rates[{i}]")))
            .collect()
    }
}

pub fn read_solution(path: &Path) -> Result<SolutionRecord, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let rec: SolutionRecord = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: malformed solution: {e}", path.display())))?;
    if rec.format_version != FORMAT_VERSION {
        return Err(CliError::Input(format!("{}: unsupported format_version", path.display())));
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RAW: &str = r#"{
        "format_version": 1,
        "field": {"characteristic": 2, "degree": 1},
        "packet_count": 4,
        "terminals": [
            {"name": "u1", "packets": [1, 2]},
            {"name": "u2", "packets": [0, 1, 3]},
            {"name": "h", "packets": [0, 2]}
        ],
        "users": [0, 1],
        "weights": ["1", 1, "3/2"]
    }"#;

    #[test]
    fn parses_packets_form() {
        let f = InstanceFile::from_json(RAW).unwrap();
        let inst = f.to_instance(FieldOverride::default()).unwrap();
        assert_eq!(inst.terminal_count(), 3);
        assert_eq!(inst.weights()[2], Rational::new(3.into(), 2.into()));
        assert_eq!(inst.model().kind_name(), "raw");
        assert_eq!(f.names(), vec!["u1", "u2", "h"]);
    }

    #[test]
    fn rejects_mixed_forms_and_bad_versions() {
        let mixed = RAW.replace(r#""packets": [0, 2]"#, r#""matrix": [[1, 0, 0, 0]]"#);
        let e = InstanceFile::from_json(&mixed).unwrap().to_instance(FieldOverride::default());
        assert!(matches!(e, Err(CliError::Input(m)) if m.contains("exactly one")));
        let table = RAW.replace(r#""users""#, r#""entropy_table": [0, 1], "users""#);
        assert!(InstanceFile::from_json(&table).unwrap().to_instance(FieldOverride::default()).is_err());
        assert!(InstanceFile::from_json(&RAW.replace("\"format_version\": 1", "\"format_version\": 2")).is_err());
        assert!(InstanceFile::from_json(&RAW.replace("\"users\"", "\"userz\"")).is_err());
    }

    #[test]
    fn index_diagnostics() {
        let e = InstanceFile::from_json(&RAW.replace("[0, 1],\n        \"weights\"", "[0, 7],\n        \"weights\""))
            .unwrap()
            .to_instance(FieldOverride::default());
        assert!(matches!(e, Err(CliError::Input(m)) if m.contains("users: index 7")));
        let e = InstanceFile::from_json(&RAW.replace("[0, 2]", "[0, 9]"))
            .unwrap()
            .to_instance(FieldOverride::default());
        assert!(matches!(e, Err(CliError::Input(m)) if m.contains("terminals")));
    }

    #[test]
    fn table_form_round_trips() {
        let text = r#"{"format_version": 1, "entropy_table": [0, 1, 1, "3/2"], "users": [0]}"#;
        let f = InstanceFile::from_json(text).unwrap();
        let inst = f.to_instance(FieldOverride::default()).unwrap();
        let back = InstanceFile::from_instance(&inst, &[]);
        let again = InstanceFile::from_json(&back.to_json()).unwrap().to_instance(FieldOverride::default()).unwrap();
        for s in TerminalSet::full(2).subsets() {
            assert_eq!(inst.model().joint_entropy(s), again.model().joint_entropy(s));
        }
        let over = FieldOverride { characteristic: Some(3), degree: None };
        assert!(f.to_instance(over).is_err());
    }
}
