//! Four-state heart-cycle segmentation with explicit state durations.

pub mod linalg;
pub mod logistic;
mod train;
pub mod viterbi;

use serde::{Deserialize, Serialize};

use super::DetectionSet;
use crate::error::{Error, Result};
use crate::preprocess::{bandpass_record, compute_envelogram, remove_spikes, Band, Envelogram, EnvelogramConfig};
use crate::signal::{Annotation, Record, SoundKind};
use linalg::{to_matrix, Gaussian};
use viterbi::{decode_frames, decode_segments, N_STATES};

pub use train::{label_frames, train_hsmm};
pub use viterbi::DurationTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum State {
    S1,
    Systole,
    S2,
    Diastole,
}

impl State {
    pub const ALL: [State; 4] = [State::S1, State::Systole, State::S2, State::Diastole];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> State {
        Self::ALL[i % N_STATES]
    }

    pub fn next(self) -> State {
        Self::from_index(self.index() + 1)
    }
}

/// Decoded per-frame states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSequence {
    feature_rate: f64,
    states: Vec<State>,
}

impl StateSequence {
    /// Rejects any transition other than staying or moving one step along the cycle.
    pub fn new(feature_rate: f64, states: Vec<State>) -> Result<Self> {
        if !(feature_rate > 0.0) {
            return Err(Error::config("feature_rate", "must be positive"));
        }
        if let Some(w) = states.windows(2).find(|w| w[1] != w[0] && w[1] != w[0].next()) {
            return Err(Error::input(format!("illegal state transition {:?} -> {:?}", w[0], w[1])));
        }
        Ok(StateSequence { feature_rate, states })
    }

    pub fn feature_rate(&self) -> f64 {
        self.feature_rate
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// One detection per maximal S1 or S2 run, at the run midpoint.
pub fn states_to_detections(seq: &StateSequence, record_id: &str, method: &str) -> Result<DetectionSet> {
    let mut items = Vec::new();
    let s = seq.states();
    let mut start = 0;
    for i in 1..=s.len() {
        if i == s.len() || s[i] != s[start] {
            let kind = match s[start] {
                State::S1 => Some(SoundKind::S1),
                State::S2 => Some(SoundKind::S2),
                _ => None,
            };
            if let Some(kind) = kind {
                items.push(Annotation::new(0.5 * (start + i - 1) as f64 / seq.feature_rate(), kind));
            }
            start = i;
        }
    }
    DetectionSet::new(record_id, method, items, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmissionKind {
    Gaussian,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    /// Explicit durations, cyclic transitions.
    Hsmm,
    /// Frame-wise Viterbi with self-transitions.
    Hmm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HsmmConfig {
    pub preset: String,
    pub band_hz: (f64, f64),
    pub filter_order: usize,
    /// Window of the spike-removal pass; `None` skips it.
    pub spike_window_s: Option<f64>,
    pub envelogram: EnvelogramConfig,
    pub emission: EmissionKind,
    pub mode: DecodeMode,
    /// Range searched for the cycle length when decoding.
    pub expected_hr_bpm: (f64, f64),
    /// Width of the S1 state placed around each S1 label.
    pub s1_duration_s: f64,
    pub s2_duration_s: f64,
    pub covariance_reg: f64,
    pub l2: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for HsmmConfig {
    fn default() -> Self {
        HsmmConfig {
            preset: "mueller".into(),
            band_hz: (15.0, 55.0),
            filter_order: 2,
            spike_window_s: Some(0.5),
            envelogram: EnvelogramConfig::default(),
            emission: EmissionKind::Logistic,
            mode: DecodeMode::Hsmm,
            expected_hr_bpm: (80.0, 210.0),
            s1_duration_s: 0.08,
            s2_duration_s: 0.06,
            covariance_reg: 1e-6,
            l2: 1e-4,
            max_iter: 500,
            grad_tol: 1e-6,
        }
    }
}

impl HsmmConfig {
    pub const PRESETS: [&'static str; 3] = ["mueller", "springer", "schmidt"];

    pub fn preset(name: &str) -> Result<Self> {
        let base = HsmmConfig::default();
        match name {
            "mueller" => Ok(base),
            "springer" => Ok(HsmmConfig {
                preset: name.into(),
                band_hz: (25.0, 400.0),
                expected_hr_bpm: (30.0, 120.0),
                ..base
            }),
            "schmidt" => Ok(HsmmConfig {
                preset: name.into(),
                band_hz: (25.0, 400.0),
                expected_hr_bpm: (30.0, 120.0),
                emission: EmissionKind::Gaussian,
                ..base
            }),
            other => Err(Error::config("preset", format!("unknown preset '{other}'"))),
        }
    }

    /// Detector name written to outputs.
    pub fn method_name(&self) -> &'static str {
        match self.emission {
            EmissionKind::Gaussian => "hsmm",
            EmissionKind::Logistic => "lr-hsmm",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.expected_hr_bpm;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::config("expected_hr_bpm", "needs 0 < lo < hi"));
        }
        if !(self.s1_duration_s > 0.0) || !(self.s2_duration_s > 0.0) {
            return Err(Error::config("s1_duration_s", "sound durations must be positive"));
        }
        if !(self.covariance_reg >= 0.0) || !(self.l2 >= 0.0) {
            return Err(Error::config("l2", "regularization must be non-negative"));
        }
        Ok(())
    }

    /// Band-pass, optional spike removal and the envelogram.
    pub fn features(&self, rec: &Record) -> Result<Envelogram> {
        let filtered = bandpass_record(rec, Band::Bandpass(self.band_hz.0, self.band_hz.1), self.filter_order)?;
        let cleaned = match self.spike_window_s {
            Some(w) => remove_spikes(&filtered, w)?,
            None => filtered,
        };
        compute_envelogram(&cleaned, &self.envelogram)
    }
}

/// Gaussian duration of one state, truncated to `[min_s, max_s]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationModel {
    pub mean_s: f64,
    pub sd_s: f64,
    pub min_s: f64,
    pub max_s: f64,
}

impl DurationModel {
    fn scaled(&self, r: f64) -> DurationModel {
        DurationModel {
            mean_s: self.mean_s * r,
            sd_s: self.sd_s * r,
            min_s: self.min_s * r,
            max_s: self.max_s * r,
        }
    }

    fn table(&self, fr: f64) -> Result<DurationTable> {
        let d_min = ((self.min_s * fr).round() as usize).max(1);
        let d_max = ((self.max_s * fr).round() as usize).max(d_min);
        DurationTable::gaussian(self.mean_s * fr, self.sd_s * fr, d_min, d_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)]
pub enum EmissionModel {
    Gaussian {
        means: [[f64; 4]; 4],
        covariances: [[[f64; 4]; 4]; 4],
    },
    Logistic {
        /// Per state `[bias, w1, .., w4]`.
        weights: [[f64; 5]; 4],
        priors: [f64; 4],
        /// Feature distribution over all labeled frames.
        mean_all: [f64; 4],
        covariance_all: [[f64; 4]; 4],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsmmModel {
    pub config: HsmmConfig,
    pub feature_rate: f64,
    /// Row-stochastic; cyclic permutation in HSMM mode.
    pub transition: [[f64; 4]; 4],
    pub durations: [DurationModel; 4],
    pub emission: EmissionModel,
    /// Mean S1-to-S1 interval of the training labels.
    pub training_cycle_s: f64,
}

/// Transition matrix used with explicit durations.
pub const CYCLIC_TRANSITIONS: [[f64; 4]; 4] = [
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [1.0, 0.0, 0.0, 0.0],
];

/// Frame-wise transition matrix used when no estimate is available.
pub const DEFAULT_HMM_TRANSITIONS: [[f64; 4]; 4] = [
    [0.84, 0.16, 0.0, 0.0],
    [0.0, 0.91, 0.09, 0.0],
    [0.0, 0.0, 0.77, 0.23],
    [0.04, 0.0, 0.0, 0.96],
];

impl HsmmModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: HsmmModel = serde_json::from_str(text)?;
        m.check()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&text).map_err(|e| Error::file(path, e))
    }

    pub(crate) fn check(&self) -> Result<()> {
        for (i, row) in self.transition.iter().enumerate() {
            if row.iter().any(|v| !(*v >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::input(format!("transition row {i} is not a distribution")));
            }
        }
        for d in &self.durations {
            if !(d.sd_s > 0.0 && d.min_s < d.mean_s && d.mean_s < d.max_s) {
                return Err(Error::input("duration model needs sd > 0 and min < mean < max"));
            }
        }
        if !(self.feature_rate > 0.0) || !(self.training_cycle_s > 0.0) {
            return Err(Error::input("model feature rate and cycle must be positive"));
        }
        Ok(())
    }

    /// Per-frame log observation likelihoods (up to a shared constant in
    /// logistic mode).
    pub fn log_emissions(&self, env: &Envelogram) -> Result<Vec<[f64; 4]>> {
        let frames: Vec<[f64; 4]> = (0..env.len()).map(|t| env.frame(t)).collect();
        let singular = || Error::Numerical("emission covariance is not positive definite".into());
        match &self.emission {
            EmissionModel::Gaussian { means, covariances } => {
                let dists = (0..4)
                    .map(|s| Gaussian::new(&means[s], &to_matrix(&covariances[s])).ok_or_else(singular))
                    .collect::<Result<Vec<_>>>()?;
                Ok(frames.iter().map(|o| std::array::from_fn(|s| dists[s].log_pdf(o))).collect())
            }
            EmissionModel::Logistic {
                weights,
                priors,
                mean_all,
                covariance_all,
            } => {
                if priors.iter().any(|&p| !(p > 0.0)) {
                    return Err(Error::Numerical("state prior of zero".into()));
                }
                let all = Gaussian::new(mean_all, &to_matrix(covariance_all)).ok_or_else(singular)?;
                Ok(frames
                    .iter()
                    .map(|o| {
                        let base = all.log_pdf(o);
                        std::array::from_fn(|s| {
                            let p = logistic::predict(&weights[s], o).max(1e-300);
                            p.ln() - priors[s].ln() + base
                        })
                    })
                    .collect())
            }
        }
    }

    /// Per-frame state posteriors from the emission model alone.
    pub fn emission_posteriors(&self, env: &Envelogram) -> Result<Vec<[f64; 4]>> {
        Ok(match &self.emission {
            EmissionModel::Logistic { weights, .. } => (0..env.len())
                .map(|t| {
                    let o = env.frame(t);
                    std::array::from_fn(|s| logistic::predict(&weights[s], &o))
                })
                .collect(),
            EmissionModel::Gaussian { .. } => self
                .log_emissions(env)?
                .into_iter()
                .map(|l| {
                    let m = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let z: f64 = l.iter().map(|v| (v - m).exp()).sum();
                    std::array::from_fn(|s| (l[s] - m).exp() / z)
                })
                .collect(),
        })
    }

    /// Cycle length from the autocorrelation of the homomorphic channel,
    /// searched within the expected heart-rate range; falls back to the
    /// training cycle when the record is too short.
    pub fn estimate_cycle_s(&self, env: &Envelogram) -> f64 {
        let x = &env.channels()[0];
        let fr = env.feature_rate();
        let (lo, hi) = self.config.expected_hr_bpm;
        let lag_min = ((60.0 / hi * fr).floor() as usize).max(1);
        let lag_max = (60.0 / lo * fr).ceil() as usize;
        if lag_max + 1 >= x.len() {
            return self.training_cycle_s;
        }
        let n = x.len() as f64;
        let acf = |k: usize| x.iter().zip(&x[k..]).map(|(a, b)| a * b).sum::<f64>() / n;
        let vals: Vec<f64> = (lag_min - 1..=lag_max + 1).map(acf).collect();
        let mut best = 1;
        for i in 1..vals.len() - 1 {
            if vals[i] > vals[best] {
                best = i;
            }
        }
        let (a, b, c) = (vals[best - 1], vals[best], vals[best + 1]);
        let den = a - 2.0 * b + c;
        let shift = if den < 0.0 { (0.5 * (a - c) / den).clamp(-0.5, 0.5) } else { 0.0 };
        let lag = (lag_min - 1 + best) as f64 + shift;
        let cycle = lag / fr;
        if cycle.is_finite() && cycle > 0.0 {
            cycle
        } else {
            self.training_cycle_s
        }
    }

    /// Duration tables in frames, with systole and diastole stretched by
    /// `cycle_s / training_cycle_s`.
    pub fn duration_tables(&self, cycle_s: f64) -> Result<[DurationTable; 4]> {
        let r = cycle_s / self.training_cycle_s;
        let fr = self.feature_rate;
        let tables: Vec<DurationTable> = State::ALL
            .iter()
            .map(|&s| match s {
                State::Systole | State::Diastole => self.durations[s.index()].scaled(r).table(fr),
                _ => self.durations[s.index()].table(fr),
            })
            .collect::<Result<_>>()?;
        Ok(tables.try_into().expect("four states"))
    }

    pub fn segment(&self, env: &Envelogram) -> Result<StateSequence> {
        if (env.feature_rate() - self.feature_rate).abs() > 1e-9 {
            return Err(Error::config(
                "feature_rate",
                format!("envelogram at {} Hz, model at {} Hz", env.feature_rate(), self.feature_rate),
            ));
        }
        let log_b = self.log_emissions(env)?;
        let path = match self.config.mode {
            DecodeMode::Hsmm => {
                let tables = self.duration_tables(self.estimate_cycle_s(env))?;
                decode_segments(&log_b, &tables)?.0
            }
            DecodeMode::Hmm => {
                let log_a = self.transition.map(|row| row.map(f64::ln));
                decode_frames(&log_b, &log_a)?.0
            }
        };
        StateSequence::new(self.feature_rate, path.into_iter().map(State::from_index).collect())
    }

    pub fn detect(&self, rec: &Record) -> Result<DetectionSet> {
        let env = self.config.features(rec)?;
        let seq = self.segment(&env)?;
        states_to_detections(&seq, rec.id(), self.config.method_name())
    }
}

/// Most probable state sequence of `env` under `model`.
pub fn extended_viterbi(model: &HsmmModel, env: &Envelogram) -> Result<StateSequence> {
    model.segment(env)
}

/// Duration-explicit decoding of precomputed log emissions; see
/// [`viterbi::decode_segments`].
pub fn decode_hsmm(log_emission: &[[f64; 4]], durations: &[DurationTable; 4]) -> Result<(Vec<State>, f64)> {
    let (path, score) = decode_segments(log_emission, durations)?;
    Ok((path.into_iter().map(State::from_index).collect(), score))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoints_of_runs() {
        use State::*;
        let mut s = vec![S1; 4];
        s.extend([Systole; 5]);
        s.extend([S2; 3]);
        let seq = StateSequence::new(50.0, s).unwrap();
        let d = states_to_detections(&seq, "r", "hsmm").unwrap();
        assert_eq!(d.len(), 2);
        assert!((d.items()[0].t - 0.03).abs() < 1e-12);
        assert_eq!(d.items()[0].kind, SoundKind::S1);
        assert!((d.items()[1].t - 0.20).abs() < 1e-12);
        let quiet = StateSequence::new(50.0, vec![Diastole; 30]).unwrap();
        assert!(states_to_detections(&quiet, "r", "hsmm").unwrap().is_empty());
    }

    #[test]
    fn illegal_transition_rejected() {
        assert!(StateSequence::new(50.0, vec![State::S1, State::S2]).is_err());
        assert!(StateSequence::new(50.0, vec![State::Diastole, State::S1]).is_ok());
    }

    #[test]
    fn labels_round_trip_through_states() {
        use crate::synth::{simulate_record, SimConfig};
        let sim = simulate_record("r", &SimConfig::default()).unwrap();
        let fr = 50.0;
        let n = (sim.record.duration() * fr).ceil() as usize;
        let cfg = HsmmConfig::default();
        let labels = label_frames(&sim.annotations, n, fr, &cfg).unwrap();
        let first = labels.iter().position(|l| l.is_some()).unwrap();
        let last = labels.iter().rposition(|l| l.is_some()).unwrap();
        let states: Vec<State> = labels[first..=last].iter().map(|l| l.unwrap()).collect();
        let seq = StateSequence::new(fr, states).unwrap();
        let det = states_to_detections(&seq, "r", "x").unwrap();
        let truth = sim.annotations.items();
        assert_eq!(det.len(), truth.len());
        for (d, t) in det.items().iter().zip(truth) {
            assert_eq!(d.kind, t.kind);
            assert!((d.t + first as f64 / fr - t.t).abs() <= 1.0 / fr, "{} vs {}", d.t, t.t);
        }
    }

    #[test]
    fn presets() {
        for p in HsmmConfig::PRESETS {
            assert_eq!(HsmmConfig::preset(p).unwrap().preset, p);
        }
        assert_eq!(HsmmConfig::preset("schmidt").unwrap().method_name(), "hsmm");
        assert!(HsmmConfig::preset("nope").is_err());
    }
}
