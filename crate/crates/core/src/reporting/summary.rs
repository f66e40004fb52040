use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::engine::{StrategyKind, TraceRecord};

pub const BUDGET_FRACTIONS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    Iterations,
    Cost,
}

impl FromStr for BudgetMode {
    type Err = ReportError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "iterations" => Ok(Self::Iterations),
            "cost" => Ok(Self::Cost),
            _ => Err(ReportError::UnknownBudgetMode(s.to_string())),
        }
    }
}

impl fmt::Display for BudgetMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Iterations => "iterations",
            Self::Cost => "cost",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub strategy: StrategyKind,
    pub fraction: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub n_traces: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub problem: String,
    pub mode: BudgetMode,
    /// Shared budget: iterations or cumulative cost at the 100% column.
    pub budget: f64,
    /// One row per strategy and budget fraction, strategies in order.
    pub rows: Vec<SummaryCell>,
}

impl SummaryTable {
    pub fn strategies(&self) -> Vec<StrategyKind> {
        let mut v: Vec<_> = self.rows.iter().map(|r| r.strategy).collect();
        v.dedup();
        v
    }
}

impl fmt::Display for SummaryTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} ({} budget {:.4}): median [q25, q75] of incumbent value", self.problem, self.mode, self.budget)?;
        write!(f, "{:<12}", "strategy")?;
        for p in BUDGET_FRACTIONS {
            write!(f, "{:>30}", format!("{:.0}%", p * 100.0))?;
        }
        writeln!(f)?;
        for s in self.strategies() {
            write!(f, "{:<12}", s.as_str())?;
            for c in self.rows.iter().filter(|r| r.strategy == s) {
                write!(f, "{:>30}", format!("{:.4} [{:.4}, {:.4}]", c.median, c.q25, c.q75))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Linearly interpolated quantile of a non-empty sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Incumbent value of a trace once `budget` is spent: the last record
/// within budget, or the first record when even that exceeds it.
pub fn trace_value_at(trace: &[TraceRecord], mode: BudgetMode, budget: f64) -> f64 {
    let within = |i: usize, r: &TraceRecord| match mode {
        BudgetMode::Iterations => (i + 1) as f64 <= budget + 1e-9,
        BudgetMode::Cost => r.cum_cost <= budget * (1.0 + 1e-12),
    };
    let idx = trace.iter().enumerate().take_while(|(i, r)| within(*i, r)).count();
    trace[idx.saturating_sub(1)].incumbent_true
}

/// Median and quartiles of the incumbent value at each budget fraction.
/// The shared budget is the smallest total over all traces.
pub fn summarize(traces: &[Vec<TraceRecord>], mode: BudgetMode) -> Result<SummaryTable, ReportError> {
    if traces.is_empty() {
        return Err(ReportError::NoTraces);
    }
    let mut groups: BTreeMap<StrategyKind, Vec<&[TraceRecord]>> = BTreeMap::new();
    for (i, t) in traces.iter().enumerate() {
        let first = t.first().ok_or_else(|| ReportError::EmptyTrace(format!("#{i}")))?;
        if traces[0].is_empty() {
            return Err(ReportError::EmptyTrace("#0".into()));
        }
        if first.problem != traces[0][0].problem {
            return Err(ReportError::Config(format!(
                "traces mix problems `{}` and `{}`",
                traces[0][0].problem, first.problem
            )));
        }
        groups.entry(first.strategy).or_default().push(t);
    }
    let budget = traces
        .iter()
        .map(|t| match mode {
            BudgetMode::Iterations => t.len() as f64,
            BudgetMode::Cost => t.last().expect("non-empty").cum_cost,
        })
        .fold(f64::INFINITY, f64::min);
    let mut rows = Vec::with_capacity(groups.len() * BUDGET_FRACTIONS.len());
    for (strategy, ts) in &groups {
        for frac in BUDGET_FRACTIONS {
            let b = match mode {
                BudgetMode::Iterations => (frac * budget).round(),
                BudgetMode::Cost => frac * budget,
            };
            let vals: Vec<f64> = ts.iter().map(|t| trace_value_at(t, mode, b)).collect();
            rows.push(SummaryCell {
                strategy: *strategy,
                fraction: frac,
                median: quantile(&vals, 0.5),
                q25: quantile(&vals, 0.25),
                q75: quantile(&vals, 0.75),
                n_traces: vals.len(),
            });
        }
    }
    Ok(SummaryTable { problem: traces[0][0].problem.clone(), mode, budget, rows })
}
