use super::linalg::{cholesky, mean_cov, to_matrix};
use super::logistic::fit_logistic;
use super::{
    DecodeMode, DurationModel, EmissionKind, EmissionModel, HsmmConfig, HsmmModel, State, CYCLIC_TRANSITIONS,
    DEFAULT_HMM_TRANSITIONS,
};
use crate::error::{Error, Result};
use crate::signal::{AnnotationSet, Record, SoundKind};

/// Frame labels derived from point annotations: frames within half the
/// sound duration of a label take its sound state, frames between an S1 and
/// the following label are systole, frames after an S2 are diastole. Frames
/// outside the labeled span are `None`.
pub fn label_frames(ann: &AnnotationSet, n_frames: usize, fr: f64, cfg: &HsmmConfig) -> Result<Vec<Option<State>>> {
    let items = ann.items();
    let has = |k| items.iter().any(|a| a.kind == k);
    if !has(SoundKind::S1) || !has(SoundKind::S2) {
        return Err(Error::input(format!(
            "record {} needs both S1 and S2 annotations for training",
            ann.record_id()
        )));
    }
    let half = |k: SoundKind| match k {
        SoundKind::S1 => 0.5 * cfg.s1_duration_s,
        SoundKind::S2 => 0.5 * cfg.s2_duration_s,
    };
    let sound = |k: SoundKind| match k {
        SoundKind::S1 => State::S1,
        SoundKind::S2 => State::S2,
    };
    let first = items[0].t - half(items[0].kind) - 1e-9;
    let last_item = items[items.len() - 1];
    let last = last_item.t + half(last_item.kind) + 1e-9;
    Ok((0..n_frames)
        .map(|f| {
            let t = f as f64 / fr;
            if t < first || t > last {
                return None;
            }
            let next_i = items.partition_point(|a| a.t <= t);
            let prev = next_i.checked_sub(1).map(|i| items[i]);
            let next = items.get(next_i);
            if let Some(p) = prev {
                if t - p.t <= half(p.kind) + 1e-9 {
                    return Some(sound(p.kind));
                }
            }
            if let Some(n) = next {
                if n.t - t <= half(n.kind) + 1e-9 {
                    return Some(sound(n.kind));
                }
            }
            prev.map(|p| match p.kind {
                SoundKind::S1 => State::Systole,
                SoundKind::S2 => State::Diastole,
            })
        })
        .collect())
}

/// Lengths of runs bounded by labeled frames of other states on both sides.
fn complete_runs(labels: &[Option<State>], out: &mut [Vec<usize>; 4]) {
    let mut start = 0;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[start] {
            if let Some(s) = labels[start] {
                let bounded_left = start > 0 && labels[start - 1].is_some();
                let bounded_right = i < labels.len() && labels[i].is_some();
                if bounded_left && bounded_right {
                    out[s.index()].push(i - start);
                }
            }
            start = i;
        }
    }
}

fn duration_model(runs: &[usize], fr: f64, state: State) -> Result<DurationModel> {
    if runs.is_empty() {
        return Err(Error::input(format!("no complete {state:?} segment in the training labels")));
    }
    let n = runs.len() as f64;
    let mean = runs.iter().sum::<usize>() as f64 / n;
    let sd = (runs.iter().map(|&r| (r as f64 - mean).powi(2)).sum::<f64>() / n).sqrt().max(1.0);
    let (mean_s, sd_s) = (mean / fr, sd / fr);
    Ok(DurationModel {
        mean_s,
        sd_s,
        min_s: (mean_s - 3.0 * sd_s).max(1.0 / fr),
        max_s: mean_s + 3.0 * sd_s,
    })
}

/// Estimates a segmentation model from annotated records.
pub fn train_hsmm(dataset: &[(Record, AnnotationSet)], cfg: &HsmmConfig) -> Result<HsmmModel> {
    cfg.validate()?;
    if dataset.len() < 2 {
        return Err(Error::input("training needs at least two annotated records"));
    }
    let fr = cfg.envelogram.feature_rate;
    let mut frames: Vec<[f64; 4]> = Vec::new();
    let mut states: Vec<State> = Vec::new();
    let mut runs: [Vec<usize>; 4] = Default::default();
    let mut trans = [[0usize; 4]; 4];
    let mut intervals = Vec::new();
    for (rec, ann) in dataset {
        let env = cfg.features(rec)?;
        let labels = label_frames(ann, env.len(), fr, cfg)?;
        for (t, l) in labels.iter().enumerate() {
            if let Some(s) = l {
                frames.push(env.frame(t));
                states.push(*s);
            }
        }
        for w in labels.windows(2) {
            if let (Some(a), Some(b)) = (w[0], w[1]) {
                trans[a.index()][b.index()] += 1;
            }
        }
        complete_runs(&labels, &mut runs);
        let s1 = ann.times(SoundKind::S1);
        intervals.extend(s1.windows(2).map(|w| w[1] - w[0]).filter(|&d| d < 2.0));
    }
    if intervals.is_empty() {
        return Err(Error::input("training labels contain no S1-to-S1 interval"));
    }
    let training_cycle_s = intervals.iter().sum::<f64>() / intervals.len() as f64;

    let durations: Vec<DurationModel> = State::ALL
        .iter()
        .map(|&s| duration_model(&runs[s.index()], fr, s))
        .collect::<Result<_>>()?;

    let counts: [usize; 4] = std::array::from_fn(|s| states.iter().filter(|x| x.index() == s).count());
    if counts.contains(&0) {
        return Err(Error::input("every state needs labeled frames"));
    }
    let by_state = |s: usize| -> Vec<[f64; 4]> {
        frames
            .iter()
            .zip(&states)
            .filter(|(_, x)| x.index() == s)
            .map(|(f, _)| *f)
            .collect()
    };
    let singular = || Error::Numerical("feature covariance is singular after regularization".into());
    let emission = match cfg.emission {
        EmissionKind::Gaussian => {
            let mut means = [[0.0; 4]; 4];
            let mut covariances = [[[0.0; 4]; 4]; 4];
            for s in 0..4 {
                let (m, c) = mean_cov(&by_state(s), cfg.covariance_reg);
                cholesky(&to_matrix(&c)).ok_or_else(singular)?;
                means[s] = m;
                covariances[s] = c;
            }
            EmissionModel::Gaussian { means, covariances }
        }
        EmissionKind::Logistic => {
            let mut weights = [[0.0; 5]; 4];
            for (s, w) in weights.iter_mut().enumerate() {
                let y: Vec<bool> = states.iter().map(|x| x.index() == s).collect();
                let fit = fit_logistic(&frames, &y, cfg.l2, cfg.max_iter, cfg.grad_tol)?;
                if !fit.converged {
                    log::warn!("logistic fit for state {s} stopped at the iteration limit");
                }
                *w = fit.weights;
            }
            let total = frames.len() as f64;
            let (mean_all, covariance_all) = mean_cov(&frames, cfg.covariance_reg);
            cholesky(&to_matrix(&covariance_all)).ok_or_else(singular)?;
            EmissionModel::Logistic {
                weights,
                priors: counts.map(|c| c as f64 / total),
                mean_all,
                covariance_all,
            }
        }
    };

    let transition = match cfg.mode {
        DecodeMode::Hsmm => CYCLIC_TRANSITIONS,
        DecodeMode::Hmm => std::array::from_fn(|s| {
            let next = (s + 1) % 4;
            let (stay, go) = (trans[s][s], trans[s][next]);
            let mut row = [0.0; 4];
            if stay + go == 0 {
                return DEFAULT_HMM_TRANSITIONS[s];
            }
            row[s] = stay as f64 / (stay + go) as f64;
            row[next] = 1.0 - row[s];
            row
        }),
    };

    let model = HsmmModel {
        config: cfg.clone(),
        feature_rate: fr,
        transition,
        durations: durations.try_into().expect("four states"),
        emission,
        training_cycle_s,
    };
    model.check()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::hsmm::{extended_viterbi, State};
    use crate::signal::Annotation;
    use crate::synth::{simulate_record, SimConfig};

    fn clean_set(n: usize) -> Vec<(Record, AnnotationSet)> {
        (0..n)
            .map(|i| {
                let sim = simulate_record(
                    &format!("r{i}"),
                    &SimConfig {
                        rng_seed: 100 + i as u64,
                        ..SimConfig::default()
                    },
                )
                .unwrap();
                (sim.record, sim.annotations)
            })
            .collect()
    }

    #[test]
    fn labeling_rules() {
        let ann = AnnotationSet::new(
            "a",
            vec![
                Annotation::new(1.0, SoundKind::S1),
                Annotation::new(1.2, SoundKind::S2),
                Annotation::new(1.5, SoundKind::S1),
            ],
        )
        .unwrap();
        let l = label_frames(&ann, 100, 50.0, &HsmmConfig::default()).unwrap();
        assert_eq!(l[47], None);
        assert_eq!(l[48], Some(State::S1));
        assert_eq!(l[52], Some(State::S1));
        assert_eq!(l[53], Some(State::Systole));
        assert_eq!(l[59], Some(State::S2));
        assert_eq!(l[62], Some(State::Diastole));
        assert_eq!(l[77], Some(State::S1));
        assert_eq!(l[78], None);
        let only_s1 = AnnotationSet::new("b", vec![Annotation::new(1.0, SoundKind::S1)]).unwrap();
        assert!(label_frames(&only_s1, 100, 50.0, &HsmmConfig::default()).is_err());
    }

    #[test]
    fn trained_model_on_clean_records() {
        let data = clean_set(10);
        let model = train_hsmm(&data, &HsmmConfig::default()).unwrap();
        assert_eq!(model.transition, CYCLIC_TRANSITIONS);
        let cycle: f64 = model.durations.iter().map(|d| d.mean_s).sum();
        assert!((cycle - 60.0 / 140.0).abs() < 0.1 * 60.0 / 140.0, "cycle {cycle}");

        let (rec, ann) = &data[0];
        let env = model.config.features(rec).unwrap();
        let labels = label_frames(ann, env.len(), model.feature_rate, &model.config).unwrap();
        let post = model.emission_posteriors(&env).unwrap();
        let (sum, n) = labels
            .iter()
            .zip(&post)
            .filter_map(|(l, p)| l.map(|s| p[s.index()]))
            .fold((0.0, 0), |(a, n), p| (a + p, n + 1));
        assert!(sum / n as f64 > 0.5);

        let seq = extended_viterbi(&model, &env).unwrap();
        assert_eq!(seq.len(), env.len());
    }

    #[test]
    fn hmm_mode_keeps_structure() {
        let data = clean_set(3);
        let cfg = HsmmConfig {
            mode: DecodeMode::Hmm,
            emission: EmissionKind::Gaussian,
            ..HsmmConfig::default()
        };
        let model = train_hsmm(&data, &cfg).unwrap();
        for (s, row) in model.transition.iter().enumerate() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (j, v) in row.iter().enumerate() {
                if j != s && j != (s + 1) % 4 {
                    assert_eq!(*v, 0.0);
                } else {
                    assert!(*v > 0.0);
                }
            }
        }
        let json = model.to_json().unwrap();
        assert_eq!(HsmmModel::from_json(&json).unwrap(), model);
    }

    #[test]
    fn needs_two_records() {
        let data = clean_set(1);
        assert!(train_hsmm(&data, &HsmmConfig::default()).is_err());
    }
}
