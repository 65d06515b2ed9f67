use crate::error::{Error, Result};

pub const N_STATES: usize = 4;

fn prev_state(j: usize) -> usize {
    (j + N_STATES - 1) % N_STATES
}

/// Log duration distribution of one state over `1..=d_max` frames.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationTable {
    /// `log_pmf[d]`, `-inf` outside `[d_min, d_max]`; index 0 unused.
    pub log_pmf: Vec<f64>,
    /// `log_surv[d] = log P(D >= d)`; index 0 unused.
    pub log_surv: Vec<f64>,
    pub d_min: usize,
    pub d_max: usize,
}

impl DurationTable {
    /// Builds the table from an unnormalized pmf over `1..=pmf.len()`.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.is_empty() || !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Numerical("duration weights must be non-negative with positive sum".into()));
        }
        let d_max = weights.len();
        let d_min = weights.iter().position(|&w| w > 0.0).unwrap() + 1;
        let mut log_pmf = vec![f64::NEG_INFINITY; d_max + 1];
        let mut log_surv = vec![f64::NEG_INFINITY; d_max + 1];
        let mut tail = 0.0;
        for d in (1..=d_max).rev() {
            let p = weights[d - 1] / total;
            tail += p;
            log_pmf[d] = p.ln();
            log_surv[d] = if d <= d_min { 0.0 } else { tail.min(1.0).ln() };
        }
        Ok(DurationTable {
            log_pmf,
            log_surv,
            d_min,
            d_max,
        })
    }

    /// Gaussian in frames truncated to `[d_min, d_max]`.
    pub fn gaussian(mean: f64, sd: f64, d_min: usize, d_max: usize) -> Result<Self> {
        let d_min = d_min.max(1);
        let d_max = d_max.max(d_min);
        let sd = sd.max(1e-6);
        let mut w: Vec<f64> = (1..=d_max)
            .map(|d| {
                if d < d_min {
                    0.0
                } else {
                    (-0.5 * ((d as f64 - mean) / sd).powi(2)).exp()
                }
            })
            .collect();
        if w.iter().sum::<f64>() <= 0.0 {
            // all mass underflowed: keep the admissible duration nearest the mean
            let best = (d_min..=d_max)
                .min_by(|&a, &b| (a as f64 - mean).abs().total_cmp(&(b as f64 - mean).abs()))
                .unwrap();
            w[best - 1] = 1.0;
        }
        Self::from_weights(&w)
    }
}

/// Maximum a posteriori segmentation under explicit state durations and the
/// fixed cycle S1 -> systole -> S2 -> diastole -> S1.
///
/// The path score is `log(1/4)` for the initial state plus the summed log
/// emissions plus a duration term per segment: the first and the last
/// segment may be cut by the observation edges and use the survival
/// `log P(D >= d)`; interior segments use the pmf. Among equal scores the
/// longer duration of the segment being closed wins. Returns the per-frame
/// states and the path score.
pub fn decode_segments(log_b: &[[f64; N_STATES]], dur: &[DurationTable; N_STATES]) -> Result<(Vec<usize>, f64)> {
    let t_len = log_b.len();
    let min_dur = dur.iter().map(|d| d.d_min).min().unwrap_or(1);
    if t_len == 0 || t_len < min_dur {
        return Err(Error::input(format!(
            "{t_len} frames are fewer than the shortest state duration ({min_dur} frames)"
        )));
    }
    let mut cum = vec![[0.0; N_STATES]; t_len + 1];
    for t in 0..t_len {
        for s in 0..N_STATES {
            cum[t + 1][s] = cum[t][s] + log_b[t][s];
        }
    }
    let emis = |s: usize, a: usize, b: usize| cum[b + 1][s] - cum[a][s];
    let log_init = (1.0 / N_STATES as f64).ln();

    let mut delta = vec![[f64::NEG_INFINITY; N_STATES]; t_len];
    let mut back = vec![[0usize; N_STATES]; t_len];
    for t in 0..t_len.saturating_sub(1) {
        for j in 0..N_STATES {
            let dj = &dur[j];
            let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
            for d in 1..=dj.d_max.min(t + 1) {
                let cand = if d == t + 1 {
                    log_init + dj.log_surv[d] + emis(j, 0, t)
                } else if d >= dj.d_min {
                    delta[t - d][prev_state(j)] + dj.log_pmf[d] + emis(j, t + 1 - d, t)
                } else {
                    continue;
                };
                if cand > f64::NEG_INFINITY && cand >= best {
                    best = cand;
                    arg = d;
                }
            }
            delta[t][j] = best;
            back[t][j] = arg;
        }
    }

    let (mut best, mut last_state, mut last_d) = (f64::NEG_INFINITY, 0, 0);
    for j in 0..N_STATES {
        let dj = &dur[j];
        for d in 1..=dj.d_max.min(t_len) {
            let cand = if d == t_len {
                log_init + dj.log_surv[d] + emis(j, 0, t_len - 1)
            } else {
                delta[t_len - 1 - d][prev_state(j)] + dj.log_surv[d] + emis(j, t_len - d, t_len - 1)
            };
            if cand > f64::NEG_INFINITY && cand >= best {
                best = cand;
                last_state = j;
                last_d = d;
            }
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::Numerical("no admissible state path for this sequence length".into()));
    }

    let mut states = vec![0usize; t_len];
    states[t_len - last_d..].iter_mut().for_each(|s| *s = last_state);
    let mut end = t_len - last_d;
    let mut state = last_state;
    while end > 0 {
        let t = end - 1;
        state = prev_state(state);
        let d = back[t][state];
        states[t + 1 - d..=t].iter_mut().for_each(|s| *s = state);
        end = t + 1 - d;
    }
    Ok((states, best))
}

/// Frame-wise Viterbi with transition matrix `log_a` and a uniform initial
/// distribution.
pub fn decode_frames(log_b: &[[f64; N_STATES]], log_a: &[[f64; N_STATES]; N_STATES]) -> Result<(Vec<usize>, f64)> {
    let t_len = log_b.len();
    if t_len == 0 {
        return Err(Error::input("empty observation sequence"));
    }
    let log_init = (1.0 / N_STATES as f64).ln();
    let mut delta: Vec<[f64; N_STATES]> = vec![[f64::NEG_INFINITY; N_STATES]; t_len];
    let mut back = vec![[0usize; N_STATES]; t_len];
    for j in 0..N_STATES {
        delta[0][j] = log_init + log_b[0][j];
    }
    for t in 1..t_len {
        for j in 0..N_STATES {
            let (mut best, mut arg) = (f64::NEG_INFINITY, j);
            for i in 0..N_STATES {
                let c = delta[t - 1][i] + log_a[i][j];
                if c > best {
                    best = c;
                    arg = i;
                }
            }
            delta[t][j] = best + log_b[t][j];
            back[t][j] = arg;
        }
    }
    let (mut state, mut best) = (0, f64::NEG_INFINITY);
    for j in 0..N_STATES {
        if delta[t_len - 1][j] > best {
            best = delta[t_len - 1][j];
            state = j;
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::Numerical("no admissible state path".into()));
    }
    let mut states = vec![0; t_len];
    states[t_len - 1] = state;
    for t in (1..t_len).rev() {
        state = back[t][state];
        states[t - 1] = state;
    }
    Ok((states, best))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Scores every legal segmentation explicitly.
    pub(crate) fn brute_force(log_b: &[[f64; N_STATES]], dur: &[DurationTable; N_STATES]) -> (Vec<usize>, f64) {
        let t_len = log_b.len();
        let mut best = (Vec::new(), f64::NEG_INFINITY);
        fn rec(
            log_b: &[[f64; N_STATES]],
            dur: &[DurationTable; N_STATES],
            segs: &mut Vec<(usize, usize)>,
            pos: usize,
            state: usize,
            best: &mut (Vec<usize>, f64),
        ) {
            let t_len = log_b.len();
            for d in 1..=dur[state].d_max.min(t_len - pos) {
                segs.push((state, d));
                if pos + d == t_len {
                    let mut score = (0.25f64).ln();
                    let m = segs.len();
                    let mut states = Vec::new();
                    for (k, &(s, d)) in segs.iter().enumerate() {
                        let term = if k == 0 || k == m - 1 { dur[s].log_surv[d] } else { dur[s].log_pmf[d] };
                        score += term;
                        for _ in 0..d {
                            let t = states.len();
                            score += log_b[t][s];
                            states.push(s);
                        }
                    }
                    if score > best.1 {
                        *best = (states, score);
                    }
                } else {
                    rec(log_b, dur, segs, pos + d, (state + 1) % N_STATES, best);
                }
                segs.pop();
            }
        }
        for s in 0..N_STATES {
            rec(log_b, dur, &mut Vec::new(), 0, s, &mut best);
        }
        assert!(t_len > 0);
        best
    }

    pub(crate) fn random_instance(rng: &mut impl Rng, t_len: usize, max_d: usize) -> (Vec<[f64; N_STATES]>, [DurationTable; N_STATES]) {
        let log_b = (0..t_len)
            .map(|_| std::array::from_fn(|_| rng.random_range(-3.0..0.0)))
            .collect();
        let dur = std::array::from_fn(|_| {
            let d_max = rng.random_range(1..=max_d);
            let d_min = rng.random_range(1..=d_max);
            let w: Vec<f64> = (1..=d_max)
                .map(|d| if d < d_min { 0.0 } else { rng.random_range(0.05..1.0) })
                .collect();
            DurationTable::from_weights(&w).unwrap()
        });
        (log_b, dur)
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let mut checked = 0;
        while checked < 200 {
            let (log_b, dur) = random_instance(&mut rng, 12, 4);
            let oracle = brute_force(&log_b, &dur);
            if oracle.1 == f64::NEG_INFINITY {
                assert!(decode_segments(&log_b, &dur).is_err());
                continue;
            }
            let (states, score) = decode_segments(&log_b, &dur).unwrap();
            assert!((score - oracle.1).abs() < 1e-9, "{score} vs {}", oracle.1);
            assert_eq!(states, oracle.0);
            checked += 1;
        }
    }

    #[test]
    fn one_hot_emissions_recover_truth() {
        let truth: Vec<usize> = [(0, 4), (1, 7), (2, 3), (3, 10), (0, 4), (1, 7), (2, 3), (3, 6)]
            .iter()
            .flat_map(|&(s, d)| std::iter::repeat_n(s, d))
            .collect();
        let log_b: Vec<[f64; 4]> = truth
            .iter()
            .map(|&s| std::array::from_fn(|j| if j == s { 0.0 } else { -1000.0 }))
            .collect();
        let dur = [
            DurationTable::gaussian(4.0, 1.0, 2, 6).unwrap(),
            DurationTable::gaussian(7.0, 1.0, 4, 10).unwrap(),
            DurationTable::gaussian(3.0, 1.0, 1, 5).unwrap(),
            DurationTable::gaussian(10.0, 2.0, 4, 16).unwrap(),
        ];
        let (states, _) = decode_segments(&log_b, &dur).unwrap();
        assert_eq!(states, truth);
        for w in states.windows(2) {
            assert!(w[1] == w[0] || w[1] == (w[0] + 1) % 4);
        }
    }

    #[test]
    fn frame_viterbi_follows_emissions() {
        let log_a = [
            [0.84f64.ln(), 0.16f64.ln(), f64::NEG_INFINITY, f64::NEG_INFINITY],
            [f64::NEG_INFINITY, 0.91f64.ln(), 0.09f64.ln(), f64::NEG_INFINITY],
            [f64::NEG_INFINITY, f64::NEG_INFINITY, 0.77f64.ln(), 0.23f64.ln()],
            [0.04f64.ln(), f64::NEG_INFINITY, f64::NEG_INFINITY, 0.96f64.ln()],
        ];
        let truth = [0, 0, 1, 1, 1, 2, 2, 3, 3, 3, 0];
        let log_b: Vec<[f64; 4]> = truth
            .iter()
            .map(|&s| std::array::from_fn(|j| if j == s { 0.0 } else { -50.0 }))
            .collect();
        assert_eq!(decode_frames(&log_b, &log_a).unwrap().0, truth.to_vec());
    }

    #[test]
    fn survival_table() {
        let d = DurationTable::from_weights(&[0.0, 1.0, 1.0, 2.0]).unwrap();
        assert_eq!(d.d_min, 2);
        assert_eq!(d.log_surv[1], 0.0);
        assert_eq!(d.log_surv[2], 0.0);
        assert!((d.log_surv[3] - 0.75f64.ln()).abs() < 1e-12);
        assert!((d.log_pmf[4] - 0.5f64.ln()).abs() < 1e-12);
        assert_eq!(d.log_pmf[1], f64::NEG_INFINITY);
    }
}
