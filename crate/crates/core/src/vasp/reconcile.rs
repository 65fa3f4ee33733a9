//! Correlating Travel Rule records, device usage logs and the ledger.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::Vasp;
use crate::claims::{LogicalTime, TravelRuleStatus, UsageEntry};
use crate::crypto::Digest;
use crate::ledger::ConfirmedTx;

/// Two transactions signed in one order on a device but confirmed in the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct OrderDivergence {
    pub signed_first: Digest,
    pub signed_second: Digest,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReconciliationReport {
    /// Confirmed transactions from this VASP's keys with no record.
    pub unrecorded: Vec<Digest>,
    /// Recorded or signed transactions that never confirmed.
    pub lost: Vec<Digest>,
    pub divergences: Vec<OrderDivergence>,
    /// Pre-authorized records whose beneficiary was not verified in time.
    pub retroactive_rejections: Vec<Digest>,
    /// Ownership is registered data; possession of a key is not legal title.
    pub ownership_note: &'static str,
}

impl ReconciliationReport {
    pub fn is_clean(&self) -> bool {
        self.unrecorded.is_empty()
            && self.lost.is_empty()
            && self.divergences.is_empty()
            && self.retroactive_rejections.is_empty()
    }
}

pub const OWNERSHIP_NOTE: &str =
    "key ownership is as registered; control of a key does not establish legal ownership";

/// Every pair `(i, j)` with `i < j` and `xs[i] > xs[j]`, found by merge sort.
pub fn inversions<T: Ord + Copy>(xs: &[T]) -> Vec<(usize, usize)> {
    fn sort<T: Ord + Copy>(items: &mut [(T, usize)], out: &mut Vec<(usize, usize)>) {
        let n = items.len();
        if n < 2 {
            return;
        }
        let mid = n / 2;
        sort(&mut items[..mid], out);
        sort(&mut items[mid..], out);
        let (left, right) = (items[..mid].to_vec(), items[mid..].to_vec());
        let (mut i, mut j, mut k) = (0, 0, 0);
        while i < left.len() && j < right.len() {
            if right[j].0 < left[i].0 {
                out.extend(left[i..].iter().map(|l| (l.1, right[j].1)));
                items[k] = right[j];
                j += 1;
            } else {
                items[k] = left[i];
                i += 1;
            }
            k += 1;
        }
        for x in left[i..].iter().chain(&right[j..]) {
            items[k] = *x;
            k += 1;
        }
    }
    let mut items: Vec<(T, usize)> = xs.iter().copied().zip(0..).collect();
    let mut out = Vec::new();
    sort(&mut items, &mut out);
    out.sort_unstable();
    out
}

impl Vasp {
    /// Compares records and device usage logs against the confirmed ledger.
    /// Pre-authorized records past their deadline are marked rejected.
    pub fn reconcile(
        &mut self,
        confirmed: &[ConfirmedTx],
        usage_logs: &[Vec<UsageEntry>],
        now: LogicalTime,
    ) -> ReconciliationReport {
        let seq: BTreeMap<Digest, u64> = confirmed.iter().map(|c| (c.digest, c.seq)).collect();

        let unrecorded = confirmed
            .iter()
            .filter(|c| self.account_for_key(&c.tx.body.from).is_some())
            .filter(|c| !self.records.contains_key(&c.digest))
            .map(|c| c.digest)
            .collect();

        let lost: BTreeSet<Digest> = self
            .records
            .keys()
            .copied()
            .chain(usage_logs.iter().flatten().map(|e| e.signed_digest))
            .filter(|d| !seq.contains_key(d))
            .collect();

        let mut divergences = Vec::new();
        for log in usage_logs {
            let mut entries: Vec<&UsageEntry> = log.iter().collect();
            entries.sort_by_key(|e| e.counter_value);
            let signed: Vec<(u64, Digest)> = entries
                .iter()
                .filter_map(|e| seq.get(&e.signed_digest).map(|s| (*s, e.signed_digest)))
                .collect();
            let order: Vec<u64> = signed.iter().map(|s| s.0).collect();
            for (i, j) in inversions(&order) {
                divergences.push(OrderDivergence {
                    signed_first: signed[i].1,
                    signed_second: signed[j].1,
                });
            }
        }

        let expired: Vec<Digest> = self
            .deadlines
            .iter()
            .filter(|(_, &deadline)| deadline < now)
            .map(|(d, _)| *d)
            .collect();
        for d in &expired {
            self.deadlines.remove(d);
            if let Some(r) = self.records.get_mut(d) {
                r.status = TravelRuleStatus::Rejected;
            }
        }

        ReconciliationReport {
            unrecorded,
            lost: lost.into_iter().collect(),
            divergences,
            retroactive_rejections: expired,
            ownership_note: OWNERSHIP_NOTE,
        }
    }
}
