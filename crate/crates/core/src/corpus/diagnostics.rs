//! Statistics of learning signals for gold and non-gold samples.

use serde::Serialize;

use super::metrics::exact_match;
use crate::models::ModelError;
use crate::par;
use crate::trainer::{score_samples, TrainError, TrainerConfig, Unlabeled, VaeModels};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtteranceSignals {
    pub utterance: String,
    pub signals: Vec<f64>,
    pub gold_flags: Vec<bool>,
    pub gold_in_samples: bool,
    /// 1-based rank of the gold signal among all signals of the utterance.
    pub gold_rank: Option<usize>,
    /// Gold signal minus the best non-gold signal.
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    /// Values below `lo` fall in the first bin, above the last edge in the last.
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], lo: f64, width: f64, bins: usize) -> Histogram {
        let mut counts = vec![0; bins];
        for v in values {
            let b = ((v - lo) / width).floor().clamp(0.0, (bins - 1) as f64) as usize;
            counts[b] += 1;
        }
        Histogram { lo, width, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalStats {
    pub count: usize,
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    pub histogram: Histogram,
}

impl SignalStats {
    fn of(values: &[f64]) -> SignalStats {
        let n = values.len();
        let mean = (n > 0).then(|| values.iter().sum::<f64>() / n as f64);
        let variance = mean.map(|m| values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64);
        SignalStats {
            count: n,
            mean,
            variance,
            histogram: Histogram::new(values, -20.0, 2.0, 20),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub utterances: Vec<UtteranceSignals>,
    /// Over utterances whose sample set holds the gold AST.
    pub gold: SignalStats,
    pub nongold: SignalStats,
    /// `rank_counts[r - 1]` utterances have gold at rank `r`.
    pub rank_counts: Vec<usize>,
    pub gold_rank1_fraction: Option<f64>,
    /// Mean gap when gold ranks first.
    pub mean_gap_rank1: Option<f64>,
    pub gold_in_samples: usize,
    pub skipped: usize,
}

/// Learning signals of S(x) for utterances with known gold ASTs.
pub fn signal_report(
    models: &VaeModels,
    cfg: &TrainerConfig,
    data: &[Unlabeled],
) -> Result<DiagnosticsRecord, TrainError> {
    let baseline = models.baseline()?;
    let per = par::map(
        data.len(),
        |i| -> Result<Option<UtteranceSignals>, TrainError> {
            let u = &data[i];
            let Some(gold) = &u.gold else { return Ok(None) };
            let hyps = match models
                .parser
                .beam_search(&u.x, cfg.sample_size, cfg.max_decode_steps)
            {
                Ok(h) => h,
                Err(ModelError::NoHypothesis(_)) => return Ok(None),
                Err(e) => return Err(e.into()),
            };
            let b = baseline.value(&baseline.features(&u.x, &models.parser));
            let scored = score_samples(models, &u.x, &hyps, b, cfg)?;
            let signals: Vec<f64> = scored.iter().map(|s| s.1.signal).collect();
            let gold_flags: Vec<bool> = scored
                .iter()
                .map(|s| exact_match(&hyps[s.0].ast, gold, models.kind, cfg.canonicalize))
                .collect();
            let gold_sig = gold_flags.iter().position(|f| *f).map(|k| signals[k]);
            let best_other = signals
                .iter()
                .zip(&gold_flags)
                .filter(|p| !p.1)
                .map(|p| *p.0)
                .reduce(f64::max);
            Ok(Some(UtteranceSignals {
                utterance: u.x.join(" "),
                gold_rank: gold_sig.map(|g| 1 + signals.iter().filter(|s| **s > g).count()),
                gap: gold_sig.zip(best_other).map(|(g, o)| g - o),
                gold_in_samples: gold_sig.is_some(),
                signals,
                gold_flags,
            }))
        },
    );
    let mut utterances = Vec::new();
    let mut skipped = 0;
    for p in per {
        match p? {
            Some(u) => utterances.push(u),
            None => skipped += 1,
        }
    }
    let (mut gold, mut nongold) = (Vec::new(), Vec::new());
    let mut rank_counts = vec![0; cfg.sample_size];
    let mut gaps = Vec::new();
    let mut with_gold = 0;
    for u in utterances.iter().filter(|u| u.gold_in_samples) {
        with_gold += 1;
        for (s, f) in u.signals.iter().zip(&u.gold_flags) {
            if *f {
                gold.push(*s)
            } else {
                nongold.push(*s)
            }
        }
        let r = u.gold_rank.expect("gold present");
        rank_counts[r - 1] += 1;
        if r == 1 {
            if let Some(g) = u.gap {
                gaps.push(g);
            }
        }
    }
    Ok(DiagnosticsRecord {
        gold: SignalStats::of(&gold),
        nongold: SignalStats::of(&nongold),
        gold_rank1_fraction: (with_gold > 0).then(|| rank_counts[0] as f64 / with_gold as f64),
        mean_gap_rank1: (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64),
        rank_counts,
        gold_in_samples: with_gold,
        skipped,
        utterances,
    })
}
