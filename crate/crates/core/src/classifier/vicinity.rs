use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{Class, Finding, Plan};

/// How co-occurrence of quasi-sensitive entities is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VicinityUnit {
    /// Within `vicinity` tokens before or after, in the same group.
    #[default]
    Tokens,
    /// On the same page (log line).
    Pages,
}

/// A resolved quasi group: identifier indices plus window size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuasiSet {
    pub members: Vec<usize>,
    pub vicinity: usize,
}

fn counts_as_evidence(f: &Finding, plan: &Plan) -> bool {
    !f.suppressed && plan.class(f.identifier) == Class::Quasi
}

/// Sensitivity of each finding in one group. `findings` must be ordered by
/// position. Direct and feedback findings are sensitive unless suppressed;
/// a quasi finding is sensitive when some quasi group containing its entity
/// has every other member within the window.
pub fn resolve_vicinity(findings: &[Finding], plan: &Plan) -> Vec<bool> {
    debug_assert!(findings.windows(2).all(|w| w[0].position <= w[1].position));
    // Per identifier: (position, page) of findings that count as evidence.
    let mut evidence: Vec<Vec<(usize, usize)>> = vec![Vec::new(); plan.identifier_count()];
    for f in findings.iter().filter(|f| counts_as_evidence(f, plan)) {
        evidence[f.identifier].push((f.position, f.segment));
    }
    findings
        .iter()
        .map(|f| {
            if f.suppressed {
                return false;
            }
            match plan.class(f.identifier) {
                Class::Direct | Class::Feedback => true,
                Class::Unmapped => false,
                Class::Quasi => plan.groups_of(f.identifier).iter().any(|&g| {
                    let set = &plan.quasi_sets()[g];
                    set.members
                        .iter()
                        .filter(|&&m| m != f.identifier)
                        .all(|&m| has_near(&evidence[m], f.position, f.segment, set.vicinity, plan.vicinity_unit()))
                }),
            }
        })
        .collect()
}

fn has_near(sorted: &[(usize, usize)], pos: usize, page: usize, w: usize, unit: VicinityUnit) -> bool {
    match unit {
        VicinityUnit::Tokens => {
            let lo = pos.saturating_sub(w);
            let i = sorted.partition_point(|&(p, _)| p < lo);
            sorted.get(i).is_some_and(|&(p, _)| p <= pos + w)
        }
        VicinityUnit::Pages => {
            let i = sorted.partition_point(|&(_, pg)| pg < page);
            sorted.get(i).is_some_and(|&(_, pg)| pg == page)
        }
    }
}

/// Decides whether deferred quasi identifiers must be evaluated at a token,
/// given the sweep-one findings of the non-deferred identifiers.
pub(crate) struct SkipOracle<'a> {
    plan: &'a Plan,
    evidence: Vec<Vec<(usize, usize)>>,
    token_count: usize,
    starts_group: bool,
    ends_group: bool,
}

impl<'a> SkipOracle<'a> {
    pub(crate) fn new(
        plan: &'a Plan,
        sweep_one: &[Finding],
        token_count: usize,
        starts_group: bool,
        ends_group: bool,
    ) -> Self {
        let mut evidence = vec![Vec::new(); plan.identifier_count()];
        for f in sweep_one.iter().filter(|f| counts_as_evidence(f, plan)) {
            evidence[f.identifier].push((f.position, f.segment));
        }
        SkipOracle {
            plan,
            evidence,
            token_count,
            starts_group,
            ends_group,
        }
    }

    /// True when a finding of deferred identifier `id` at this token could
    /// be sensitive or serve as evidence for another sensitive finding.
    pub(crate) fn must_evaluate(&self, id: usize, pos: usize, page: usize) -> bool {
        let plan = self.plan;
        plan.groups_of(id).iter().any(|&g| {
            let set = &plan.quasi_sets()[g];
            let reach = 2 * set.vicinity;
            if plan.vicinity_unit() == VicinityUnit::Tokens
                && ((!self.starts_group && pos < reach)
                    || (!self.ends_group && pos + reach >= self.token_count))
            {
                return true;
            }
            set.members
                .iter()
                .filter(|&&m| m != id && !plan.is_deferred(m))
                .all(|&m| has_near(&self.evidence[m], pos, page, reach, plan.vicinity_unit()))
        })
    }
}

/// Detects, while scanning, the first point at which a quasi group is
/// satisfied by findings seen so far.
pub(crate) struct OnlineQuasi<'a> {
    plan: &'a Plan,
    recent: Vec<VecDeque<(usize, usize)>>,
    horizon: usize,
}

impl<'a> OnlineQuasi<'a> {
    pub(crate) fn new(plan: &'a Plan) -> Self {
        let horizon = plan.quasi_sets().iter().map(|s| 2 * s.vicinity).max().unwrap_or(0);
        OnlineQuasi {
            plan,
            recent: vec![VecDeque::new(); plan.identifier_count()],
            horizon,
        }
    }

    /// Records a non-suppressed quasi finding and reports whether some quasi
    /// finding seen so far is now sensitive.
    pub(crate) fn push(&mut self, id: usize, pos: usize, page: usize) -> bool {
        let plan = self.plan;
        let unit = plan.vicinity_unit();
        for (m, q) in self.recent.iter_mut().enumerate() {
            if plan.class(m) != Class::Quasi {
                continue;
            }
            while q.front().is_some_and(|&(p, pg)| match unit {
                VicinityUnit::Tokens => p + self.horizon < pos,
                VicinityUnit::Pages => pg < page,
            }) {
                q.pop_front();
            }
        }
        self.recent[id].push_back((pos, page));
        plan.groups_of(id).iter().any(|&g| {
            let set = &plan.quasi_sets()[g];
            let w = set.vicinity;
            match unit {
                VicinityUnit::Pages => set
                    .members
                    .iter()
                    .all(|&m| self.recent[m].iter().any(|&(_, pg)| pg == page)),
                VicinityUnit::Tokens => set.members.iter().any(|&cand| {
                    self.recent[cand]
                        .iter()
                        .filter(|&&(r, _)| r + w >= pos)
                        .any(|&(r, _)| {
                            set.members.iter().filter(|&&m| m != cand).all(|&m| {
                                self.recent[m].iter().any(|&(q, _)| q.abs_diff(r) <= w)
                            })
                        })
                }),
            }
        })
    }
}
