use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::ep::{IterationTrace, Verdict};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub m: usize,
    pub uniform_bound: f64,
    pub delta: f64,
    /// `δ_m / δ_{m−1}`; absent for `m = 1`.
    pub ratio: Option<f64>,
    pub constraint_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub verdict: Verdict,
    pub iterations: usize,
    pub t_end: f64,
    pub halvings: usize,
    pub data_norm: f64,
    pub final_ratio: Option<f64>,
    pub suggestion: Option<String>,
    pub rows: Vec<SummaryRow>,
}

/// Per-`m` table, constraint residual curve and verdict of one trace.
pub fn report_summary(trace: &IterationTrace) -> Summary {
    let rows: Vec<SummaryRow> = (0..trace.delta_history.len())
        .map(|i| SummaryRow {
            m: i + 1,
            uniform_bound: trace.uniform_bound_history[i],
            delta: trace.delta_history[i],
            ratio: (i > 0).then(|| {
                let prev = trace.delta_history[i - 1];
                if prev > 0.0 {
                    trace.delta_history[i] / prev
                } else {
                    0.0
                }
            }),
            constraint_residual: trace.constraint_residuals[i],
        })
        .collect();
    let verdict = if rows.is_empty() { Verdict::NoIterations } else { trace.verdict };
    let suggestion = match verdict {
        Verdict::Nonconvergent => Some(format!(
            "{}; rerun with T = {}",
            trace.failure.as_deref().unwrap_or("no contraction"),
            0.5 * trace.t_end
        )),
        _ => None,
    };
    Summary {
        verdict,
        iterations: rows.len(),
        t_end: trace.t_end,
        halvings: trace.halvings,
        data_norm: trace.data_norm,
        final_ratio: rows.last().and_then(|r| r.ratio),
        suggestion,
        rows,
    }
}

impl Summary {
    pub fn verdict_label(&self) -> &'static str {
        match self.verdict {
            Verdict::Contraction => "contraction",
            Verdict::Nonconvergent => "nonconvergent",
            Verdict::NoIterations => "no iterations",
        }
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>4}  {:>14}  {:>14}  {:>10}  {:>14}", "m", "bound", "delta", "ratio", "poisson");
        for r in &self.rows {
            let ratio = r.ratio.map_or("-".to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(
                s,
                "{:>4}  {:>14.6e}  {:>14.6e}  {:>10}  {:>14.6e}",
                r.m, r.uniform_bound, r.delta, ratio, r.constraint_residual
            );
        }
        let _ = writeln!(s, "verdict: {}", self.verdict_label());
        if let Some(r) = self.final_ratio {
            let _ = writeln!(s, "final ratio: {r:.4}");
        }
        if let Some(hint) = &self.suggestion {
            let _ = writeln!(s, "suggestion: {hint}");
        }
        s
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["m", "uniform_bound", "delta", "ratio", "constraint_residual"])
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        for r in &self.rows {
            w.write_record([
                r.m.to_string(),
                format!("{:e}", r.uniform_bound),
                format!("{:e}", r.delta),
                r.ratio.map_or(String::new(), |v| format!("{v:e}")),
                format!("{:e}", r.constraint_residual),
            ])
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(deltas: Vec<f64>, verdict: Verdict) -> IterationTrace {
        let n = deltas.len();
        IterationTrace {
            iterates: Vec::new(),
            uniform_bound_history: vec![1.0; n],
            delta_history: deltas,
            constraint_residuals: vec![0.0; n],
            data_norm: 1.0,
            t_end: 0.1,
            halvings: 0,
            verdict,
            failure: None,
        }
    }

    #[test]
    fn verdicts() {
        let ok = report_summary(&trace(vec![1.0, 0.25, 0.05], Verdict::Contraction));
        assert_eq!(ok.verdict_label(), "contraction");
        assert!((ok.final_ratio.unwrap() - 0.2).abs() < 1e-15);
        assert!(ok.to_table().contains("final ratio: 0.2000"));
        let bad = report_summary(&trace(vec![1.0, 2.0, 4.0, 8.0], Verdict::Nonconvergent));
        assert_eq!(bad.verdict_label(), "nonconvergent");
        assert!(bad.suggestion.unwrap().contains("T = 0.05"));
        let empty = report_summary(&trace(vec![], Verdict::NoIterations));
        assert_eq!(empty.verdict_label(), "no iterations");
        assert!(empty.final_ratio.is_none());
        let mut buf = Vec::new();
        ok.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }
}
