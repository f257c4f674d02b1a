//! Running subjects over a sample list and scoring the decisions.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::Serialize;

use super::samples::{Channel, FCategory, Sample};
use super::sink::ChannelSink;
use super::subjects::{Behavior, Decision, Envelope, Subject};
use crate::stats::{mcnemar, ConfusionMatrix};

/// Mediates every sample through every subject, sample-major. Returns one
/// decision vector per subject, aligned with `samples`.
pub fn run_subjects(samples: &[Sample], subjects: &mut [&mut dyn Subject], sink: &mut dyn ChannelSink) -> Vec<Vec<Decision>> {
    let mut out: Vec<Vec<Decision>> = subjects.iter().map(|_| Vec::with_capacity(samples.len())).collect();
    for s in samples {
        let env = Envelope::of(s);
        let behavior = Behavior::for_category(s.f_category);
        for (subject, decisions) in subjects.iter_mut().zip(out.iter_mut()) {
            decisions.push(subject.mediate(&env, behavior, sink));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Cell {
    pub channel: Channel,
    pub category: FCategory,
}

/// Confusion matrix per `(channel, F-category)` cell. A block counts as a
/// positive.
pub fn per_cell(samples: &[Sample], decisions: &[Decision]) -> BTreeMap<Cell, ConfusionMatrix> {
    let mut out: BTreeMap<Cell, ConfusionMatrix> = BTreeMap::new();
    for (s, d) in samples.iter().zip(decisions) {
        let cell = Cell {
            channel: s.channel,
            category: s.f_category.cell(),
        };
        out.entry(cell).or_default().record(s.label, d.blocked());
    }
    out
}

pub fn overall(cells: &BTreeMap<Cell, ConfusionMatrix>) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::default();
    cells.values().for_each(|c| m.merge(c));
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McNemarResult {
    /// `a` blocked, `b` delivered.
    pub b: u64,
    /// `a` delivered, `b` blocked.
    pub c: u64,
    pub chi2: f64,
}

pub fn mcnemar_pair(a: &[Decision], b: &[Decision]) -> McNemarResult {
    let (mut nb, mut nc) = (0u64, 0u64);
    for (x, y) in a.iter().zip(b) {
        match (x.blocked(), y.blocked()) {
            (true, false) => nb += 1,
            (false, true) => nc += 1,
            _ => {}
        }
    }
    McNemarResult {
        b: nb,
        c: nc,
        chi2: mcnemar(nb, nc),
    }
}
