//! Upper envelope of the lines `p_i + q_i z` and the expected gain of its maximum.

use crate::error::{Error, Result};

/// Slope differences below this are treated as parallel lines.
pub const PARALLEL_TOLERANCE: f64 = 1e-14;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Intercepts `p` (current means) and slopes `q` (sigma-tilde) of the lines.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSet {
    p: Vec<f64>,
    q: Vec<f64>,
}

impl LineSet {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.len() != q.len() {
            return Err(Error::Dimension(format!(
                "line set needs matching non-empty vectors, got {} intercepts and {} slopes",
                p.len(),
                q.len()
            )));
        }
        if p.iter().chain(&q).any(|v| !v.is_finite()) {
            return Err(Error::NumericalDegeneracy(
                "line set has non-finite entries".into(),
            ));
        }
        Ok(Self { p, q })
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// Lines that attain the upper envelope on an interval of positive length.
#[derive(Debug, Clone, PartialEq)]
pub struct DominantSet {
    /// Original line indices after sorting by slope and collapsing parallel lines.
    pub sorted: Vec<usize>,
    /// Positions into `sorted` of the lines on the envelope, increasing.
    pub kept: Vec<usize>,
    /// `z` where consecutive kept lines cross; strictly increasing.
    pub breakpoints: Vec<f64>,
}

impl DominantSet {
    /// Original index of the `j`-th kept line.
    pub fn line(&self, j: usize) -> usize {
        self.sorted[self.kept[j]]
    }
}

/// Sorts by ascending slope, drops parallel lines that are beaten by a higher
/// intercept, then sweeps once keeping a stack of envelope lines.
pub fn dominant_lines(lines: &LineSet) -> DominantSet {
    let (p, q) = (&lines.p, &lines.q);
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        q[a].total_cmp(&q[b])
            .then(p[b].total_cmp(&p[a]))
            .then(a.cmp(&b))
    });

    let mut sorted: Vec<usize> = Vec::with_capacity(order.len());
    let mut group_slope = f64::NAN;
    for &i in &order {
        if let Some(&head) = sorted.last() {
            if q[i] - group_slope < PARALLEL_TOLERANCE {
                if p[i] > p[head] {
                    *sorted.last_mut().unwrap() = i;
                }
                continue;
            }
        }
        group_slope = q[i];
        sorted.push(i);
    }

    let mut kept: Vec<usize> = vec![0];
    // crossings[j] is where kept[j] takes over from kept[j - 1]
    let mut crossings: Vec<f64> = vec![f64::NEG_INFINITY];
    for pos in 1..sorted.len() {
        let line = sorted[pos];
        loop {
            let top = sorted[*kept.last().unwrap()];
            let z = (p[top] - p[line]) / (q[line] - q[top]);
            if kept.len() > 1 && z <= *crossings.last().unwrap() {
                kept.pop();
                crossings.pop();
                continue;
            }
            kept.push(pos);
            crossings.push(z);
            break;
        }
    }
    crossings.remove(0);
    DominantSet {
        sorted,
        kept,
        breakpoints: crossings,
    }
}

/// `ln f(-c)` for `f(z) = z Phi(z) + phi(z)`, stable for any `c`.
///
/// Uses `f(-c) = phi(c) (1 - c R(c))` with the Mills ratio `R(c) = Phi(-c) / phi(c)`,
/// switching to the asymptotic expansion of `1 - c R(c)` in the far tail.
pub fn log_f_neg(c: f64) -> f64 {
    let c = c.abs();
    let log_phi = -0.5 * c * c - LN_SQRT_2PI;
    if c < 2.5 {
        let phi = log_phi.exp();
        let upper_tail = 0.5 * libm::erfc(c / std::f64::consts::SQRT_2);
        (phi - c * upper_tail).ln()
    } else if c < 30.0 {
        let mills = 0.5 * libm::erfc(c / std::f64::consts::SQRT_2) / log_phi.exp();
        log_phi + (1.0 - c * mills).ln()
    } else {
        let r = 1.0 / (c * c);
        let series = 1.0
            + r * (-3.0 + r * (15.0 + r * (-105.0 + r * (945.0 + r * (-10395.0 + r * 135135.0)))));
        log_phi + (r * series).ln()
    }
}

/// Expected improvement of the envelope maximum under a standard normal `Z`:
/// `E[max_i (p_i + q_i Z)] - max_i p_i`.
///
/// The breakpoint sum is accumulated in log space and exponentiated at the end.
pub fn kg_h(lines: &LineSet) -> f64 {
    let set = dominant_lines(lines);
    if set.kept.len() < 2 {
        return 0.0;
    }
    let q = &lines.q;
    let logs: Vec<f64> = set
        .breakpoints
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            let dq = q[set.line(j + 1)] - q[set.line(j)];
            dq.ln() + log_f_neg(c)
        })
        .collect();
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return 0.0;
    }
    let sum: f64 = logs.iter().map(|l| (l - peak).exp()).sum();
    (peak + sum.ln()).exp()
}
