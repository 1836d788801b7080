use std::sync::LazyLock;

use regex::Regex;

use super::CaptionError;
use crate::document::{SpatialRef, Zone};

static ZONE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(upper|middle|lower)[- ](left|center|centre|right)\b|\bcent(?:er|re)\b").unwrap()
});

static PERCENT_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\(\s*(-?\d+(?:\.\d+)?)\s*%\s*,\s*(-?\d+(?:\.\d+)?)\s*%\s*\)").unwrap()
});

/// Spatial references found in a caption, in text order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpatialScan {
    pub refs: Vec<SpatialRef>,
    /// Percent coordinates outside [0, 100]; not included in `refs`.
    pub out_of_range: Vec<SpatialRef>,
}

pub fn extract_spatial_refs(caption: &str) -> SpatialScan {
    let mut found: Vec<(usize, SpatialRef)> = Vec::new();
    for m in ZONE_RE.captures_iter(caption) {
        let whole = m.get(0).unwrap();
        let zone = match (m.get(1), m.get(2)) {
            (Some(row), Some(col)) => {
                let col = col.as_str().to_ascii_lowercase().replace("centre", "center");
                let row = row.as_str().to_ascii_lowercase();
                if row == "middle" && col == "center" {
                    Some(Zone::Center)
                } else {
                    Zone::from_name(&format!("{row}-{col}"))
                }
            }
            _ => Some(Zone::Center),
        };
        if let Some(zone) = zone {
            found.push((whole.start(), SpatialRef::Zone { zone }));
        }
    }
    for m in PERCENT_RE.captures_iter(caption) {
        let x: f64 = m[1].parse().unwrap();
        let y: f64 = m[2].parse().unwrap();
        found.push((m.get(0).unwrap().start(), SpatialRef::Percent { x_pct: x, y_pct: y }));
    }
    found.sort_by_key(|(pos, _)| *pos);
    let mut scan = SpatialScan::default();
    for (_, r) in found {
        if r.is_valid() {
            scan.refs.push(r);
        } else {
            scan.out_of_range.push(r);
        }
    }
    scan
}

/// Grid cell for a normalized screen position. Thirds are closed on the
/// right, so a point on a boundary belongs to the lower-index cell.
pub fn zone_of(x_pct: f64, y_pct: f64) -> Result<Zone, CaptionError> {
    let third = |v: f64| {
        if v <= 100.0 / 3.0 {
            0
        } else if v <= 200.0 / 3.0 {
            1
        } else {
            2
        }
    };
    if !(0.0..=100.0).contains(&x_pct) || !(0.0..=100.0).contains(&y_pct) {
        return Err(CaptionError::Input(format!(
            "position ({x_pct}%, {y_pct}%) is outside [0, 100]"
        )));
    }
    Ok(Zone::from_cell(third(y_pct), third(x_pct)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zone_names() {
        let s = extract_spatial_refs("cursor moves to upper-left");
        assert_eq!(s.refs, vec![SpatialRef::Zone { zone: Zone::UpperLeft }]);
        let s = extract_spatial_refs("A logo in the Lower Right and a box at the upper-center, then center");
        assert_eq!(
            s.refs,
            vec![
                SpatialRef::Zone { zone: Zone::LowerRight },
                SpatialRef::Zone { zone: Zone::UpperCenter },
                SpatialRef::Zone { zone: Zone::Center },
            ]
        );
        assert!(extract_spatial_refs("the centered title").refs.is_empty());
    }

    #[test]
    fn percent_coordinates() {
        let s = extract_spatial_refs("person at (40%, 75%) walks");
        assert_eq!(s.refs, vec![SpatialRef::Percent { x_pct: 40.0, y_pct: 75.0 }]);
        let s = extract_spatial_refs("moves to (140%, 10%)");
        assert!(s.refs.is_empty());
        assert_eq!(s.out_of_range, vec![SpatialRef::Percent { x_pct: 140.0, y_pct: 10.0 }]);
    }

    #[test]
    fn zone_of_examples() {
        assert_eq!(zone_of(50.0, 50.0).unwrap(), Zone::Center);
        assert_eq!(zone_of(0.0, 0.0).unwrap(), Zone::UpperLeft);
        assert_eq!(zone_of(100.0 / 3.0, 80.0).unwrap(), Zone::LowerLeft);
        assert_eq!(zone_of(200.0 / 3.0, 200.0 / 3.0).unwrap(), Zone::Center);
        assert_eq!(zone_of(100.0, 100.0).unwrap(), Zone::LowerRight);
        assert!(zone_of(-0.1, 5.0).is_err());
        assert!(zone_of(5.0, 100.5).is_err());
    }

    proptest! {
        #[test]
        fn zone_of_partitions_the_square(x in 0.0f64..=100.0, y in 0.0f64..=100.0) {
            let z = zone_of(x, y).unwrap();
            let (row, col) = z.cell();
            let lo = |i: usize| if i == 0 { f64::NEG_INFINITY } else { i as f64 * 100.0 / 3.0 };
            let hi = |i: usize| (i + 1) as f64 * 100.0 / 3.0;
            let inside = |v: f64, i: usize| v > lo(i) && (v <= hi(i) || i == 2);
            prop_assert!(inside(x, col) && inside(y, row));
            let hits = (0..3).flat_map(|r| (0..3).map(move |c| (r, c)))
                .filter(|&(r, c)| inside(x, c) && inside(y, r))
                .count();
            prop_assert_eq!(hits, 1);
        }
    }
}
