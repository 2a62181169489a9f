//! Synthetic dynamic graphs from the block model with piecewise-constant
//! intensities, and the preset experimental scenarios.
//!
//! Rates are Poisson means per ordered node pair per unit of time; an
//! interval of length `Δ` gets mean `rate * Δ`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::model::{Event, InteractionTensor, TimeGrid};

/// How intervals are assigned to rate regimes.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeRegimes {
    /// Regime of every interval, 0-based.
    Fixed(Vec<usize>),
    /// Independent draws with these regime weights.
    Random(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub name: String,
    pub n_nodes: usize,
    pub grid: TimeGrid,
    /// Node cluster proportions `ω`.
    pub node_weights: Vec<f64>,
    pub time_regimes: TimeRegimes,
    /// One `K x K` row-major rate matrix per regime.
    pub rates: Vec<Vec<f64>>,
    /// Contrast parameter the rates were built from, if any.
    pub psi: Option<f64>,
}

fn check_simplex(what: &str, w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::InvalidScenario(format!("{what}: no weights")));
    }
    if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidScenario(format!(
            "{what}: weights must be non-negative"
        )));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidScenario(format!(
            "{what}: weights sum to {s}, not 1"
        )));
    }
    Ok(())
}

impl SimScenario {
    pub fn n_clusters(&self) -> usize {
        self.node_weights.len()
    }

    pub fn n_regimes(&self) -> usize {
        self.rates.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 {
            return Err(Error::InvalidScenario("no nodes".into()));
        }
        check_simplex("node weights", &self.node_weights)?;
        let k = self.n_clusters();
        if self.rates.is_empty() {
            return Err(Error::InvalidScenario("no rate matrices".into()));
        }
        for (r, m) in self.rates.iter().enumerate() {
            if m.len() != k * k {
                return Err(Error::InvalidScenario(format!(
                    "rate matrix {r} has {} entries, expected {}",
                    m.len(),
                    k * k
                )));
            }
            if m.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(Error::InvalidScenario(format!(
                    "rate matrix {r} has a negative entry"
                )));
            }
        }
        match &self.time_regimes {
            TimeRegimes::Fixed(y) => {
                if y.len() != self.grid.n_intervals() {
                    return Err(Error::InvalidScenario(format!(
                        "{} regime labels for {} intervals",
                        y.len(),
                        self.grid.n_intervals()
                    )));
                }
                if let Some(&bad) = y.iter().find(|&&r| r >= self.n_regimes()) {
                    return Err(Error::InvalidScenario(format!("unknown regime {bad}")));
                }
            }
            TimeRegimes::Random(w) => {
                check_simplex("time weights", w)?;
                if w.len() != self.n_regimes() {
                    return Err(Error::InvalidScenario(format!(
                        "{} time weights for {} regimes",
                        w.len(),
                        self.n_regimes()
                    )));
                }
            }
        }
        if let Some(psi) = self.psi {
            if !(psi >= 1.0) {
                return Err(Error::InvalidScenario(format!(
                    "psi must be >= 1, got {psi}"
                )));
            }
        }
        Ok(())
    }

    pub fn rate(&self, regime: usize, k: usize, g: usize) -> f64 {
        self.rates[regime][k * self.n_clusters() + g]
    }

    /// Draws node labels and interval regimes.
    pub fn sample_labels<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Vec<usize>, Vec<usize>)> {
        self.validate()?;
        let z = sample_memberships(&self.node_weights, self.n_nodes, rng)?;
        let y = match &self.time_regimes {
            TimeRegimes::Fixed(y) => y.clone(),
            TimeRegimes::Random(w) => sample_memberships(w, self.grid.n_intervals(), rng)?,
        };
        Ok((z, y))
    }

    /// True integrated intensity of block `(k, g)` at every breakpoint.
    pub fn true_cumulative(&self, k: usize, g: usize, y: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(y.len() + 1);
        let mut acc = 0.0;
        out.push(acc);
        for (u, &r) in y.iter().enumerate() {
            acc += self.rate(r, k, g) * self.grid.length(u);
            out.push(acc);
        }
        out
    }

    fn check_labels(&self, z: &[usize], y: &[usize]) -> Result<()> {
        self.validate()?;
        if z.len() != self.n_nodes || y.len() != self.grid.n_intervals() {
            return Err(Error::InvalidScenario(
                "label vectors do not match the scenario".into(),
            ));
        }
        if z.iter().any(|&k| k >= self.n_clusters()) || y.iter().any(|&r| r >= self.n_regimes()) {
            return Err(Error::InvalidScenario(
                "label outside the scenario's clusters".into(),
            ));
        }
        Ok(())
    }
}

/// Independent categorical draws from `weights`.
pub fn sample_memberships<R: Rng + ?Sized>(
    weights: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    check_simplex("membership weights", weights)?;
    let dist = WeightedIndex::new(weights)
        .map_err(|e| Error::InvalidScenario(format!("membership weights: {e}")))?;
    Ok((0..n).map(|_| dist.sample(rng)).collect())
}

/// Per-block samplers; `None` for blocks with rate zero.
type SamplerTable = Vec<Option<Poisson<f64>>>;

/// Poisson samplers for each distinct `(regime, interval length)`.
fn samplers(scenario: &SimScenario, y: &[usize]) -> (Vec<SamplerTable>, Vec<usize>) {
    let k = scenario.n_clusters();
    let mut tables = Vec::new();
    let mut index = BTreeMap::new();
    let per_interval = y
        .iter()
        .enumerate()
        .map(|(u, &r)| {
            let len = scenario.grid.length(u);
            *index.entry((r, len.to_bits())).or_insert_with(|| {
                let table = (0..k * k)
                    .map(|kg| {
                        let mean = scenario.rates[r][kg] * len;
                        (mean > 0.0).then(|| Poisson::new(mean).expect("finite positive mean"))
                    })
                    .collect();
                tables.push(table);
                tables.len() - 1
            })
        })
        .collect();
    (tables, per_interval)
}

/// Independent Poisson counts for every ordered pair `i != j` and interval.
pub fn sample_tensor<R: Rng + ?Sized>(
    scenario: &SimScenario,
    z: &[usize],
    y: &[usize],
    rng: &mut R,
) -> Result<InteractionTensor> {
    scenario.check_labels(z, y)?;
    let n = scenario.n_nodes;
    let k = scenario.n_clusters();
    let (tables, per_interval) = samplers(scenario, y);
    let mut tensor = InteractionTensor::zeros(n, scenario.grid.clone());
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let kg = z[i] * k + z[j];
            for (u, &t) in per_interval.iter().enumerate() {
                if let Some(p) = &tables[t][kg] {
                    let c: f64 = p.sample(rng);
                    if c > 0.0 {
                        tensor.add(i, j, u, c as u32)?;
                    }
                }
            }
        }
    }
    Ok(tensor)
}

/// Timestamped events: the counts of [`sample_tensor`] (drawn first, from
/// the same generator) with each event placed uniformly in its interval.
pub fn sample_events<R: Rng + ?Sized>(
    scenario: &SimScenario,
    z: &[usize],
    y: &[usize],
    rng: &mut R,
) -> Result<Vec<Event>> {
    let tensor = sample_tensor(scenario, z, y, rng)?;
    let mut events = Vec::with_capacity(tensor.total() as usize);
    let last = scenario.grid.n_intervals() - 1;
    for (i, j, u, c) in tensor.nonzero() {
        let (lo, hi) = scenario.grid.bounds(u);
        for _ in 0..c {
            let mut t = lo + rng.random::<f64>() * (hi - lo);
            if t >= hi && u != last {
                t = lo;
            }
            events.push(Event {
                source: i,
                target: j,
                time: t.min(hi),
            });
        }
    }
    Ok(events)
}

/// Names accepted by [`scenario_preset`].
pub const PRESET_NAMES: [&str; 4] = ["scenario1", "overfit", "scenario2", "scenario2-k3"];

fn alternating_blocks(n_intervals: usize, block: usize) -> Vec<usize> {
    (0..n_intervals).map(|u| (u / block) % 2).collect()
}

fn contrast_2x2(psi: f64) -> (Vec<f64>, Vec<f64>) {
    (vec![psi, 1.0, 1.0, psi], vec![1.0, psi, psi, 1.0])
}

/// Preset experimental configurations. `psi` overrides the default contrast.
///
/// * `scenario1`: 50 nodes, 100 unit intervals, two equal clusters; regime
///   `P = [[ψ,1],[1,ψ]]` on `I_1..I_25 ∪ I_51..I_75` and `Q = [[1,ψ],[ψ,1]]`
///   elsewhere; `ψ = 2`.
/// * `overfit`: the same over `[0, 100]` split into 1000 intervals of length
///   0.1 with `ψ = 1.4` (per-interval means 0.14 and 0.1); regime `P` on
///   `I_1..I_250 ∪ I_501..I_750`.
/// * `scenario2`: 50 nodes, 50 unit intervals; `P = [[ψ,2],[2,ψ]]` on the
///   first 25 intervals and `2P` on the last 25; `ψ = 2.5`.
/// * `scenario2-k3`: as `scenario2` with three equal clusters, `ψ` on the
///   diagonal and 2 elsewhere.
///
/// Names are matched case-insensitively.
pub fn scenario_preset(name: &str, psi: Option<f64>) -> Result<SimScenario> {
    let lower = name.to_ascii_lowercase();
    let name = lower.as_str();
    let scenario = match name {
        "scenario1" | "overfit" => {
            let overfit = name == "overfit";
            let psi = psi.unwrap_or(if overfit { 1.4 } else { 2.0 });
            let (n_intervals, length) = if overfit { (1000, 0.1) } else { (100, 1.0) };
            let (p, q) = contrast_2x2(psi);
            SimScenario {
                name: name.to_string(),
                n_nodes: 50,
                grid: TimeGrid::uniform(n_intervals, length)?,
                node_weights: vec![0.5, 0.5],
                time_regimes: TimeRegimes::Fixed(alternating_blocks(n_intervals, n_intervals / 4)),
                rates: vec![p, q],
                psi: Some(psi),
            }
        }
        "scenario2" | "scenario2-k3" => {
            let psi = psi.unwrap_or(2.5);
            let k = if name == "scenario2" { 2 } else { 3 };
            let p: Vec<f64> = (0..k * k)
                .map(|kg| if kg / k == kg % k { psi } else { 2.0 })
                .collect();
            let doubled = p.iter().map(|x| 2.0 * x).collect();
            SimScenario {
                name: name.to_string(),
                n_nodes: 50,
                grid: TimeGrid::uniform(50, 1.0)?,
                node_weights: vec![1.0 / k as f64; k],
                time_regimes: TimeRegimes::Fixed((0..50).map(|u| usize::from(u >= 25)).collect()),
                rates: vec![p, doubled],
                psi: Some(psi),
            }
        }
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_tensor;
    use crate::search::restart_rng;

    #[test]
    fn degenerate_weights_give_one_label() {
        let mut rng = restart_rng(1, 0);
        let z = sample_memberships(&[1.0, 0.0, 0.0], 20, &mut rng).unwrap();
        assert!(z.iter().all(|&k| k == 0));
    }

    #[test]
    fn memberships_are_reproducible() {
        let a = sample_memberships(&[0.5, 0.5], 30, &mut restart_rng(9, 0)).unwrap();
        let b = sample_memberships(&[0.5, 0.5], 30, &mut restart_rng(9, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_weights_off_the_simplex() {
        assert!(sample_memberships(&[0.5, 0.6], 3, &mut restart_rng(0, 0)).is_err());
        assert!(sample_memberships(&[], 3, &mut restart_rng(0, 0)).is_err());
    }

    #[test]
    fn zero_rates_give_zero_tensor() {
        let mut s = scenario_preset("scenario2", None).unwrap();
        s.rates = vec![vec![0.0; 4], vec![0.0; 4]];
        let mut rng = restart_rng(3, 0);
        let (z, y) = s.sample_labels(&mut rng).unwrap();
        assert_eq!(sample_tensor(&s, &z, &y, &mut rng).unwrap().total(), 0);
        assert!(sample_events(&s, &z, &y, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn events_rebuild_the_sampled_tensor() {
        let s = scenario_preset("scenario2", Some(2.2)).unwrap();
        let mut rng = restart_rng(5, 0);
        let (z, y) = s.sample_labels(&mut rng).unwrap();
        let tensor = sample_tensor(&s, &z, &y, &mut restart_rng(11, 0)).unwrap();
        let events = sample_events(&s, &z, &y, &mut restart_rng(11, 0)).unwrap();
        assert!(events
            .iter()
            .all(|e| e.time >= 0.0 && e.time <= s.grid.horizon()));
        assert_eq!(
            build_tensor(&events, s.grid.clone(), s.n_nodes).unwrap(),
            tensor
        );
    }

    #[test]
    fn scenario1_preset_layout() {
        let s = scenario_preset("scenario1", None).unwrap();
        let TimeRegimes::Fixed(y) = &s.time_regimes else {
            panic!("fixed regimes expected")
        };
        let c1: Vec<usize> = (0..100).filter(|&u| y[u] == 0).map(|u| u + 1).collect();
        let expected: Vec<usize> = (1..=25).chain(51..=75).collect();
        assert_eq!(c1, expected);
        assert_eq!(s.rates[0], vec![2.0, 1.0, 1.0, 2.0]);
        assert_eq!(s.rates[1], vec![1.0, 2.0, 2.0, 1.0]);
        assert_eq!(s.node_weights, vec![0.5, 0.5]);
    }

    #[test]
    fn overfit_preset_means_per_interval() {
        let s = scenario_preset("overfit", None).unwrap();
        assert_eq!(s.grid.n_intervals(), 1000);
        assert!((s.grid.horizon() - 100.0).abs() < 1e-9);
        let means: Vec<f64> = s.rates[0].iter().map(|r| r * s.grid.length(0)).collect();
        for (m, e) in means.iter().zip([0.14, 0.1, 0.1, 0.14]) {
            assert!((m - e).abs() < 1e-12);
        }
        let TimeRegimes::Fixed(y) = &s.time_regimes else {
            panic!("fixed regimes expected")
        };
        assert!((0..250).chain(500..750).all(|u| y[u] == 0));
        assert!((250..500).chain(750..1000).all(|u| y[u] == 1));
    }

    #[test]
    fn scenario2_k3_rates() {
        let s = scenario_preset("scenario2-K3", Some(2.6)).unwrap();
        assert_eq!(s.name, "scenario2-k3");
        assert_eq!(
            s.rates[0],
            vec![2.6, 2.0, 2.0, 2.0, 2.6, 2.0, 2.0, 2.0, 2.6]
        );
        assert_eq!(s.rates[1][0], 5.2);
        assert!(scenario_preset("nope", None).is_err());
    }
}
