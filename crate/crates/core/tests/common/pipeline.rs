use ctrlforge::composer::Aggregator;

#[derive(Clone, Copy, Debug)]
pub enum Agg {
    None,
    Mean,
    Max,
    Median,
    Sum,
}

impl Agg {
    pub fn make(self) -> Option<Aggregator> {
        match self {
            Agg::None => None,
            Agg::Mean => Some(Aggregator::Mean),
            Agg::Max => Some(Aggregator::Max),
            Agg::Median => Some(Aggregator::Median),
            Agg::Sum => Some(Aggregator::Sum),
        }
    }

    fn reduce(self, xs: &[f64]) -> f64 {
        let mut s = xs.to_vec();
        s.sort_by(f64::total_cmp);
        match self {
            Agg::None => unreachable!(),
            Agg::Mean => xs.iter().sum::<f64>() / xs.len() as f64,
            Agg::Sum => xs.iter().sum(),
            Agg::Max => s[s.len() - 1],
            Agg::Median if s.len() % 2 == 1 => s[s.len() / 2],
            Agg::Median => 0.5 * (s[s.len() / 2 - 1] + s[s.len() / 2]),
        }
    }
}

/// Replays the sampling rule over the full history: sample 0 at reset is
/// visible at once, later samples every `interval` substeps become visible
/// `delay` substeps after they are taken, and each output shows the newest
/// `buffer` arrivals. Returns per-step outputs and the number of source
/// evaluations needed.
pub fn pipeline_oracle(
    interval: u64,
    buffer: usize,
    delay: u64,
    agg: Agg,
    substeps: u64,
    steps: u64,
) -> (Vec<Vec<f64>>, usize) {
    let mut samples = vec![(0u64, 0u64)];
    let mut s = interval;
    while s <= substeps * steps {
        samples.push((s + delay, s));
        s += interval;
    }
    let visible_at = |t: u64| -> Vec<(u64, u64)> {
        let mut v: Vec<_> = samples.iter().copied().filter(|&(a, _)| a <= t).collect();
        v.sort();
        v[v.len().saturating_sub(buffer)..].to_vec()
    };
    let mut outputs = Vec::new();
    for k in 0..=steps {
        let shown: Vec<f64> = visible_at(k * substeps).iter().map(|&(_, s)| s as f64).collect();
        outputs.push(match agg {
            Agg::None if buffer == 1 => shown,
            Agg::None => {
                let mut padded = vec![0.0; buffer - shown.len()];
                padded.extend(shown);
                padded
            }
            a => vec![a.reduce(&shown)],
        });
    }
    // A sample is worth evaluating when it is still in flight at the end of
    // the control step that takes it, or is shown at that step's end.
    let needed = samples
        .iter()
        .filter(|&&(arrival, s)| {
            if s == 0 {
                return true;
            }
            let end = s.div_ceil(substeps) * substeps;
            arrival > end || visible_at(end).contains(&(arrival, s))
        })
        .count();
    (outputs, needed)
}

pub const GRID: [(usize, usize, usize, Agg); 12] = [
    (1, 1, 0, Agg::None),
    (1, 1, 2, Agg::None),
    (2, 3, 0, Agg::None),
    (2, 3, 1, Agg::None),
    (3, 2, 0, Agg::None),
    (4, 1, 0, Agg::None),
    (1, 3, 7, Agg::None),
    (2, 2, 3, Agg::None),
    (1, 5, 0, Agg::Mean),
    (1, 5, 0, Agg::Max),
    (3, 4, 2, Agg::Median),
    (5, 2, 4, Agg::Sum),
];

