//! JSON document format for process laws.
//!
//! ```json
//! {
//!   "horizon": 2,
//!   "spaces": [["a", "b"], ["a", "b"]],
//!   "kernels": {
//!     "":  {"a": 0.5, "b": 0.5},
//!     "a": {"a": 1.0},
//!     "b": {"a": 0.25, "b": 0.75}
//!   },
//!   "values": [{"a": 0, "b": 1}, {"a": 0, "b": 1}]
//! }
//! ```
//!
//! Kernel keys are `/`-joined atom ids of the conditioning prefix; the root is
//! the empty string. `values` is optional and may cover only some atoms.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::law::ProcessLaw;
use super::space::{Atom, Path, PathSpace};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LawDocument {
    horizon: usize,
    spaces: Vec<Vec<String>>,
    kernels: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<BTreeMap<String, f64>>>,
}

/// Parses a law document.
pub fn load_law(text: &str) -> Result<ProcessLaw> {
    let doc: LawDocument = serde_json::from_str(text).map_err(|e| {
        Error::parse(
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    if doc.horizon == 0 {
        return Err(Error::parse("horizon", "must be at least 1"));
    }
    if doc.spaces.len() != doc.horizon {
        return Err(Error::parse(
            "spaces",
            format!(
                "{} coordinate spaces for horizon {}",
                doc.spaces.len(),
                doc.horizon
            ),
        ));
    }
    if let Some(values) = &doc.values {
        if values.len() != doc.horizon {
            return Err(Error::parse(
                "values",
                format!("{} value maps for horizon {}", values.len(), doc.horizon),
            ));
        }
    }
    let mut coords = Vec::with_capacity(doc.horizon);
    for (t, ids) in doc.spaces.iter().enumerate() {
        let value_map = doc.values.as_ref().map(|v| &v[t]);
        if let Some(map) = value_map {
            if let Some(unknown) = map.keys().find(|k| !ids.contains(k)) {
                return Err(Error::parse(
                    format!("values[{t}]"),
                    format!("unknown atom {unknown:?}"),
                ));
            }
        }
        coords.push(
            ids.iter()
                .map(|id| Atom {
                    id: id.clone(),
                    value: value_map.and_then(|m| m.get(id).copied()),
                })
                .collect(),
        );
    }
    let space =
        Arc::new(PathSpace::new(coords).map_err(|e| Error::parse("spaces", e.to_string()))?);

    let mut kernels = Vec::with_capacity(doc.kernels.len());
    for (key, row) in &doc.kernels {
        let context = format!("kernels[{key:?}]");
        let ids: Vec<&str> = if key.is_empty() {
            Vec::new()
        } else {
            key.split('/').collect()
        };
        if ids.len() >= doc.horizon {
            return Err(Error::parse(
                context,
                "prefix must be shorter than the horizon",
            ));
        }
        let prefix = space
            .path_from_ids(0, &ids)
            .map_err(|e| Error::parse(context.clone(), e.to_string()))?;
        let coord = space.coordinate(ids.len());
        let mut entries = Vec::with_capacity(row.len());
        for (id, &p) in row {
            let atom = coord.index_of(id).ok_or_else(|| {
                Error::parse(
                    context.clone(),
                    format!("unknown atom {id:?} in coordinate {}", ids.len() + 1),
                )
            })?;
            entries.push((atom, p));
        }
        kernels.push((prefix, entries));
    }
    ProcessLaw::from_kernels(space, kernels)
}

/// Serializes a law; kernels are written only for supported prefixes.
pub fn save_law(law: &ProcessLaw) -> String {
    let space = law.space();
    let spaces = space
        .coordinates()
        .iter()
        .map(|c| c.atoms().iter().map(|a| a.id.clone()).collect())
        .collect();
    let mut kernels = BTreeMap::new();
    for t in 0..law.horizon() {
        for node in law.nodes_at(t) {
            let coord = space.coordinate(t);
            let row = node
                .children
                .iter()
                .map(|b| (coord.atom(b.atom).id.clone(), b.prob))
                .collect();
            kernels.insert(space.render(0, &node.prefix), row);
        }
    }
    let has_values = space
        .coordinates()
        .iter()
        .any(|c| c.atoms().iter().any(|a| a.value.is_some()));
    let values = has_values.then(|| {
        space
            .coordinates()
            .iter()
            .map(|c| {
                c.atoms()
                    .iter()
                    .filter_map(|a| a.value.map(|v| (a.id.clone(), v)))
                    .collect()
            })
            .collect()
    });
    let doc = LawDocument {
        horizon: law.horizon(),
        spaces,
        kernels,
        values,
    };
    serde_json::to_string_pretty(&doc).expect("law documents always serialize")
}

/// Convenience: resolves `/`-joined ids into a prefix of `law`'s space.
pub fn parse_prefix(space: &PathSpace, key: &str) -> Result<Path> {
    if key.is_empty() {
        return Ok(Path::root());
    }
    let ids: Vec<&str> = key.split('/').collect();
    space.path_from_ids(0, &ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
        "horizon": 2,
        "spaces": [["a", "b"], ["a", "b"]],
        "kernels": {
            "": {"a": 0.5, "b": 0.5},
            "a": {"a": 1.0},
            "b": {"a": 0.25, "b": 0.75}
        },
        "values": [{"a": 0, "b": 1}, {"a": 0, "b": 1}]
    }"#;

    #[test]
    fn loads_document() {
        let law = load_law(DOC).unwrap();
        assert_eq!(law.horizon(), 2);
        assert_eq!(law.support_size(), 3);
        let b = parse_prefix(law.space(), "b").unwrap();
        assert_eq!(law.kernel(&b).unwrap(), vec![(0, 0.25), (1, 0.75)]);
        assert_eq!(law.space().coordinate(1).atom(1).value, Some(1.0));
    }

    #[test]
    fn save_then_load_preserves_kernels() {
        let law = load_law(DOC).unwrap();
        let again = load_law(&save_law(&law)).unwrap();
        assert_eq!(law.space(), again.space());
        for (p, m) in law.paths() {
            assert_eq!(again.prefix_mass(p), m);
        }
    }

    #[test]
    fn bad_row_sum_reports_field() {
        let bad = DOC.replace("0.75", "0.70");
        match load_law(&bad) {
            Err(Error::Parse { context, .. }) => assert_eq!(context, "kernels[\"b\"]"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_line() {
        match load_law("{\n\"horizon\": }") {
            Err(Error::Parse { context, .. }) => assert!(context.starts_with("line 2")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_atom_is_rejected() {
        let bad = DOC.replace(r#""a": {"a": 1.0}"#, r#""a": {"zz": 1.0}"#);
        assert!(matches!(load_law(&bad), Err(Error::Parse { .. })));
    }

    #[test]
    fn small_deviation_is_accepted() {
        let ok = DOC.replace("0.75", "0.7500000001");
        let law = load_law(&ok).unwrap();
        let b = parse_prefix(law.space(), "b").unwrap();
        let total: f64 = law.kernel(&b).unwrap().iter().map(|x| x.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
