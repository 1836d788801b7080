use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Anchor,
    Residual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerUpdate {
    pub value: String,
    pub time_s: f64,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub value: String,
    pub last_update_s: f64,
    pub origin: Origin,
    /// Every value the attribute has held, oldest first.
    pub history: Vec<LedgerUpdate>,
}

/// Current value of every tracked attribute, subject → attribute → entry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributeLedger {
    pub entries: BTreeMap<String, BTreeMap<String, LedgerEntry>>,
}

impl AttributeLedger {
    pub fn value(&self, subject: &str, attribute: &str) -> Option<&str> {
        self.entries
            .get(subject)
            .and_then(|m| m.get(attribute))
            .map(|e| e.value.as_str())
    }

    pub fn entry(&self, subject: &str, attribute: &str) -> Option<&LedgerEntry> {
        self.entries.get(subject).and_then(|m| m.get(attribute))
    }

    /// Sets a value unless it is already current. Returns whether the
    /// ledger changed.
    pub fn establish(&mut self, subject: &str, attribute: &str, value: &str, time_s: f64, origin: Origin) -> bool {
        let slot = self
            .entries
            .entry(subject.to_string())
            .or_default()
            .entry(attribute.to_string());
        let update = LedgerUpdate {
            value: value.to_string(),
            time_s,
            origin,
        };
        match slot {
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let e = e.get_mut();
                if e.value == value {
                    return false;
                }
                e.value = value.to_string();
                e.last_update_s = time_s;
                e.origin = origin;
                e.history.push(update);
                true
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(LedgerEntry {
                    value: value.to_string(),
                    last_update_s: time_s,
                    origin,
                    history: vec![update],
                });
                true
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat `(subject, attribute, value)` view, sorted.
    pub fn triples(&self) -> Vec<(String, String, String)> {
        self.entries
            .iter()
            .flat_map(|(s, m)| m.iter().map(move |(a, e)| (s.clone(), a.clone(), e.value.clone())))
            .collect()
    }
}

/// State an event leaves its subject in, as `(attribute, value)`.
pub fn event_effect(predicate: &str) -> Option<(&'static str, &'static str)> {
    Some(match predicate {
        "opens" => ("state", "open"),
        "closes" => ("state", "closed"),
        "shatters" => ("state", "shattered"),
        "breaks" => ("state", "broken"),
        "falls" => ("state", "fallen"),
        "appears" | "enters" => ("visibility", "visible"),
        "disappears" | "exits" | "leaves" => ("visibility", "hidden"),
        "stops" => ("motion", "stopped"),
        "starts" => ("motion", "started"),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn establish_tracks_history() {
        let mut l = AttributeLedger::default();
        assert!(l.establish("door", "state", "closed", 0.0, Origin::Anchor));
        assert!(!l.establish("door", "state", "closed", 2.0, Origin::Residual));
        assert!(l.establish("door", "state", "open", 4.0, Origin::Residual));
        let e = l.entry("door", "state").unwrap();
        assert_eq!((e.value.as_str(), e.last_update_s, e.origin), ("open", 4.0, Origin::Residual));
        assert_eq!(e.history.len(), 2);
        assert_eq!(l.triples(), vec![("door".into(), "state".into(), "open".into())]);
    }
}
