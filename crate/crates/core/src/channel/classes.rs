//! Canonical class tables.
//!
//! Each regime has a hand-written table in the standard numbering and an
//! independent enumeration rule; the tests assert the two agree.

use std::collections::BTreeSet;
use std::fmt;

use super::{ChannelError, KrausSet, Signature};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    Qubit5,
    Qubit4,
    QutritIO39,
    QutritSIO15,
}

impl Regime {
    pub fn dim(self) -> usize {
        match self {
            Regime::Qubit5 | Regime::Qubit4 => 2,
            Regime::QutritIO39 | Regime::QutritSIO15 => 3,
        }
    }

    pub fn class_count(self) -> usize {
        hand_rows(self).len()
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Qubit5 => "qubit5",
            Regime::Qubit4 => "qubit4",
            Regime::QutritIO39 => "qutrit-io39",
            Regime::QutritSIO15 => "qutrit-sio15",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalClass {
    pub regime: Regime,
    /// 1-based class number.
    pub index: usize,
}

impl CanonicalClass {
    pub fn new(regime: Regime, index: usize) -> Option<Self> {
        (1..=regime.class_count())
            .contains(&index)
            .then_some(Self { regime, index })
    }

    pub fn signature(&self) -> Signature {
        Signature::from_one_based(hand_rows(self.regime)[self.index - 1])
    }
}

impl fmt::Display for CanonicalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "K{}", self.index)
    }
}

const QUBIT5: [&[u8]; 5] = [&[1, 1], &[2, 2], &[1, 2], &[2, 1], &[1, 0]];

#[rustfmt::skip]
const IO39: [&[u8]; 39] = [
    &[1, 1, 1], &[1, 1, 2], &[1, 1, 3], &[1, 1, 0],
    &[2, 2, 1], &[2, 2, 2], &[2, 2, 3], &[2, 2, 0],
    &[1, 2, 1], &[1, 2, 2], &[1, 2, 3], &[1, 2, 0],
    &[2, 1, 1], &[2, 1, 2], &[2, 1, 3], &[2, 1, 0],
    &[1, 3, 1], &[1, 3, 2], &[1, 3, 3], &[1, 3, 0],
    &[2, 3, 1], &[2, 3, 2], &[2, 3, 3], &[2, 3, 0],
    &[3, 2, 1], &[3, 2, 2], &[3, 2, 3], &[3, 2, 0],
    &[3, 3, 1], &[3, 3, 2], &[3, 3, 3], &[3, 3, 0],
    &[3, 1, 1], &[3, 1, 2], &[3, 1, 3], &[3, 1, 0],
    &[3, 0, 0], &[1, 0, 0], &[2, 0, 0],
];

#[rustfmt::skip]
const SIO15: [&[u8]; 15] = [
    &[1, 2, 3], &[1, 3, 2], &[2, 1, 3], &[2, 3, 1], &[3, 2, 1], &[3, 1, 2],
    &[1, 2, 0], &[1, 3, 0], &[2, 1, 0], &[2, 3, 0], &[3, 2, 0], &[3, 1, 0],
    &[1, 0, 0], &[2, 0, 0], &[3, 0, 0],
];

fn hand_rows(regime: Regime) -> &'static [&'static [u8]] {
    match regime {
        Regime::Qubit5 => &QUBIT5,
        Regime::Qubit4 => &QUBIT5[..4],
        Regime::QutritIO39 => &IO39,
        Regime::QutritSIO15 => &SIO15,
    }
}

/// The hand-written table: signature of class `n` at position `n − 1`.
pub fn hand_table(regime: Regime) -> Vec<Signature> {
    hand_rows(regime).iter().map(|r| Signature::from_one_based(r)).collect()
}

/// Signatures generated from the structural rule of each regime.
///
/// Qutrit IO: all three columns nonzero, or columns 1–2 nonzero, or column 1
/// only. Qutrit SIO: the row-injective subset of that. Qubit: both columns
/// nonzero, plus the single `(1,1)` entry in the five-operator form.
pub fn enumerate_signatures(regime: Regime) -> BTreeSet<Signature> {
    let d = regime.dim();
    let rows = |n: usize| -> Vec<Vec<Option<usize>>> {
        let mut out: Vec<Vec<Option<usize>>> = vec![vec![]];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..d).map(move |r| {
                        let mut q = p.clone();
                        q.push(Some(r));
                        q
                    })
                })
                .collect();
        }
        out
    };
    let pad = |mut v: Vec<Option<usize>>| {
        v.resize(d, None);
        Signature(v)
    };
    let mut set = BTreeSet::new();
    match regime {
        Regime::Qubit5 | Regime::Qubit4 => {
            set.extend(rows(2).into_iter().map(pad));
            if regime == Regime::Qubit5 {
                set.insert(Signature(vec![Some(0), None]));
            }
        }
        Regime::QutritIO39 | Regime::QutritSIO15 => {
            for n in [3, 2, 1] {
                set.extend(rows(n).into_iter().map(pad));
            }
            if regime == Regime::QutritSIO15 {
                set.retain(Signature::is_row_injective);
            }
        }
    }
    set
}

/// Classification outcome for one operator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClassSlot {
    Class(CanonicalClass),
    /// All entries vanish; zero operators carry no class.
    Zero,
    Unclassified(Signature),
}

impl ClassSlot {
    pub fn class(&self) -> Option<CanonicalClass> {
        match self {
            ClassSlot::Class(c) => Some(*c),
            _ => None,
        }
    }
}

/// Maps every operator of `s` to its class within `regime`.
pub fn classify(s: &KrausSet, regime: Regime) -> Result<Vec<ClassSlot>, ChannelError> {
    if s.dim() != regime.dim() {
        return Err(ChannelError::DimMismatch(s.dim(), regime.dim()));
    }
    let table = hand_table(regime);
    s.ops()
        .iter()
        .enumerate()
        .map(|(index, k)| {
            if k.is_zero() {
                return Ok(ClassSlot::Zero);
            }
            let sig = k.signature().ok_or(ChannelError::NotIncoherent { index })?;
            Ok(match table.iter().position(|t| t == sig) {
                Some(p) => ClassSlot::Class(CanonicalClass { regime, index: p + 1 }),
                None => ClassSlot::Unclassified(sig.clone()),
            })
        })
        .collect()
}
