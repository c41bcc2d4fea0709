//! Achievable-region checks for two-dimensional sections.
//!
//! A section `(i, j)` is an initial vector with exactly two nonzero
//! coordinates. Margins are `bound − value`, so a negative margin is a
//! violation.

use super::BlochVector3;

/// Below this a coordinate counts as zero when detecting the section.
pub const SECTION_TOL: f64 = 1e-12;
/// Slack on margins before a condition counts as violated.
pub const MARGIN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionRecord {
    /// 1 to 4.
    pub id: u8,
    pub applicable: bool,
    pub satisfied: bool,
    /// For condition 2 this is the signed residual of the equality; zero
    /// when not applicable.
    pub margin: f64,
    /// Evaluated and reported, never a pass/fail criterion.
    pub advisory: bool,
}

impl ConditionRecord {
    fn not_applicable(id: u8) -> Self {
        Self {
            id,
            applicable: false,
            satisfied: true,
            margin: 0.0,
            advisory: id == 2,
        }
    }

    fn bound(id: u8, margin: f64) -> Self {
        Self {
            id,
            applicable: true,
            satisfied: margin >= -MARGIN_TOL,
            margin,
            advisory: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    /// 1-based `(i, j)` with `i < j`, if `t` lies in a section.
    pub section: Option<(usize, usize)>,
    pub records: [ConditionRecord; 4],
    /// On `(i, 7|8)` sections: distance of `m7`, `m8` inside their
    /// intervals (negative when outside). Advisory.
    pub interval_margin: Option<f64>,
}

impl ConditionReport {
    pub fn record(&self, id: u8) -> &ConditionRecord {
        &self.records[id as usize - 1]
    }

    /// No applicable non-advisory condition is violated.
    pub fn all_satisfied(&self) -> bool {
        self.records.iter().all(|r| r.advisory || r.satisfied)
    }
}

/// The section of `t`, if exactly two coordinates are nonzero.
pub fn section_of(t: &BlochVector3) -> Option<(usize, usize)> {
    let nz: Vec<usize> = (1..=8).filter(|&i| t.get(i).abs() > SECTION_TOL).collect();
    match nz[..] {
        [i, j] => Some((i, j)),
        _ => None,
    }
}

/// Residual of `−√3 m7 + m8 − 2√3/3`.
pub fn condition2_residual(m: &BlochVector3) -> f64 {
    let s3 = 3f64.sqrt();
    -s3 * m.get(7) + m.get(8) - 2.0 * s3 / 3.0
}

const COHERENCE_PAIRS: [(usize, usize); 3] = [(1, 4), (2, 5), (3, 6)];

fn l1(v: &BlochVector3) -> f64 {
    COHERENCE_PAIRS.iter().map(|&(a, b)| v.get(a).hypot(v.get(b))).sum()
}

pub fn check_conditions(t: &BlochVector3, m: &BlochVector3) -> ConditionReport {
    let mut records: [ConditionRecord; 4] = std::array::from_fn(|k| ConditionRecord::not_applicable(k as u8 + 1));
    let mut interval_margin = None;
    let section = section_of(t);
    let sq = |x: f64| x * x;
    match section {
        Some((i, j)) if i <= 6 && j >= 7 => {
            records[0] = ConditionRecord::bound(1, sq(t.get(i)) - sq(m.get(i)));
            let s3 = 3f64.sqrt();
            let (m7, m8) = (m.get(7), m.get(8));
            interval_margin = Some(
                (m7 - (1.0 - s3) / 3.0)
                    .min(2.0 / s3 - m7)
                    .min(m8 + 2.0 * s3 / 3.0)
                    .min(2.0 * s3 / 3.0 - m8),
            );
        }
        Some((7, 8)) => {
            let r = condition2_residual(m);
            records[1] = ConditionRecord {
                id: 2,
                applicable: true,
                satisfied: r.abs() <= MARGIN_TOL,
                margin: r,
                advisory: true,
            };
        }
        Some((i, j)) if COHERENCE_PAIRS.contains(&(i, j)) => {
            let margin = sq(t.get(i)) + sq(t.get(j)) - sq(m.get(i)) - sq(m.get(j));
            records[2] = ConditionRecord::bound(3, margin);
        }
        Some((i, j)) => {
            let margin = sq(t.get(i).abs() + t.get(j).abs()) - sq(m.get(i).abs() + m.get(j).abs());
            records[3] = ConditionRecord::bound(4, margin);
        }
        None => {
            records[3] = ConditionRecord::bound(4, sq(l1(t)) - sq(l1(m)));
        }
    }
    ConditionReport {
        section,
        records,
        interval_margin,
    }
}
