use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-to-one pairing of labels and detections within a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub tolerance_s: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// `(label_t, detection_t)`, in label order.
    pub matched_pairs: Vec<(f64, f64)>,
}

impl MatchResult {
    pub fn n_labels(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn n_detections(&self) -> usize {
        self.tp + self.fp
    }

    pub fn total_offset_s(&self) -> f64 {
        self.matched_pairs.iter().map(|(l, d)| (l - d).abs()).sum()
    }
}

pub(crate) fn check_tolerance(tolerance_s: f64) -> Result<()> {
    if !(tolerance_s > 0.0) || !tolerance_s.is_finite() {
        return Err(Error::config("tolerance_s", "must be a positive number"));
    }
    Ok(())
}

#[derive(Clone, Copy, Default)]
struct Cell {
    count: usize,
    bonus: usize,
    cost: f64,
    from: u8,
}

impl Cell {
    fn better(&self, other: &Cell) -> bool {
        (self.count, self.bonus) > (other.count, other.bonus)
            || ((self.count, self.bonus) == (other.count, other.bonus) && self.cost < other.cost)
    }
}

/// Order-preserving matching of two sorted sequences. Pairs must lie within
/// `tol`; the result maximizes the pair count, then the number of pairs with
/// `same(i, j)` true, then minimizes the summed offset. Returns index pairs.
pub(crate) fn align(a: &[f64], b: &[f64], tol: f64, same: impl Fn(usize, usize) -> bool) -> Vec<(usize, usize)> {
    let (n, m) = (a.len(), b.len());
    let w = m + 1;
    let mut dp = vec![Cell::default(); (n + 1) * w];
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 && j == 0 {
                continue;
            }
            let mut best: Option<Cell> = None;
            let mut offer = |c: Cell| {
                if best.as_ref().is_none_or(|b| c.better(b)) {
                    best = Some(c);
                }
            };
            if i > 0 && j > 0 {
                let d = (a[i - 1] - b[j - 1]).abs();
                if d <= tol {
                    let p = dp[(i - 1) * w + j - 1];
                    offer(Cell {
                        count: p.count + 1,
                        bonus: p.bonus + same(i - 1, j - 1) as usize,
                        cost: p.cost + d,
                        from: 0,
                    });
                }
            }
            if i > 0 {
                offer(Cell { from: 1, ..dp[(i - 1) * w + j] });
            }
            if j > 0 {
                offer(Cell { from: 2, ..dp[i * w + j - 1] });
            }
            dp[i * w + j] = best.expect("a predecessor exists");
        }
    }
    let mut pairs = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        match dp[i * w + j].from {
            0 => {
                pairs.push((i - 1, j - 1));
                i -= 1;
                j -= 1;
            }
            1 => i -= 1,
            _ => j -= 1,
        }
    }
    pairs.reverse();
    pairs
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Maximum one-to-one matching of label and detection times with
/// `|label - detection| <= tolerance_s`; among maximum matchings the one
/// with the smallest summed offset is returned.
pub fn match_detections(labels: &[f64], detections: &[f64], tolerance_s: f64) -> Result<MatchResult> {
    check_tolerance(tolerance_s)?;
    let (l, d) = (sorted(labels), sorted(detections));
    let pairs = align(&l, &d, tolerance_s, |_, _| true);
    let tp = pairs.len();
    Ok(MatchResult {
        tolerance_s,
        tp,
        fp: d.len() - tp,
        fn_: l.len() - tp,
        matched_pairs: pairs.iter().map(|&(i, j)| (l[i], d[j])).collect(),
    })
}
