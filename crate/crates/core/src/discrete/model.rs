use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

const PROB_TOL: f64 = 1e-12;

/// A finite sample space carrying a finite family of probability measures.
///
/// Each point has a real label (used for lookups, metrics and the built-in
/// examples' random variables).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteModel {
    points: Vec<f64>,
    measures: Vec<Vec<f64>>,
    measure_labels: Vec<String>,
}

/// A set of point indices, sorted and without duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize)]
pub struct Event(Vec<usize>);

impl Event {
    pub fn new(mut idx: Vec<usize>) -> Self {
        idx.sort_unstable();
        idx.dedup();
        Event(idx)
    }

    pub fn empty() -> Self {
        Event(Vec::new())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn is_subset(&self, other: &Event) -> bool {
        self.0.iter().all(|i| other.contains(*i))
    }

    pub fn union(&self, other: &Event) -> Event {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Event::new(v)
    }
}

impl FiniteModel {
    pub fn new(points: Vec<f64>, measures: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (1..=measures.len()).map(|k| format!("P{k}")).collect();
        Self::with_labels(points, measures, labels)
    }

    pub fn with_labels(points: Vec<f64>, measures: Vec<Vec<f64>>, measure_labels: Vec<String>) -> Result<Self> {
        if points.is_empty() {
            return input("model needs at least one point");
        }
        if measures.is_empty() {
            return input("model needs at least one measure");
        }
        if measure_labels.len() != measures.len() {
            return input("one label per measure required");
        }
        if points.iter().any(|p| !p.is_finite()) {
            return input("point labels must be finite");
        }
        for (k, m) in measures.iter().enumerate() {
            if m.len() != points.len() {
                return input(format!(
                    "measure {k} has {} entries for {} points",
                    m.len(),
                    points.len()
                ));
            }
            if m.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return input(format!("measure {k} has a negative or non-finite entry"));
            }
            let total: f64 = m.iter().sum();
            if (total - 1.0).abs() > PROB_TOL {
                return input(format!("measure {k} sums to {total}, not 1"));
            }
        }
        Ok(Self {
            points,
            measures,
            measure_labels,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn measures(&self) -> &[Vec<f64>] {
        &self.measures
    }

    pub fn measure_labels(&self) -> &[String] {
        &self.measure_labels
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index_of(&self, label: f64) -> Option<usize> {
        self.points.iter().position(|p| *p == label)
    }

    /// Event from point labels.
    pub fn event(&self, labels: &[f64]) -> Result<Event> {
        labels
            .iter()
            .map(|l| {
                self.index_of(*l)
                    .ok_or_else(|| crate::Error::Input(format!("unknown point label {l}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Event::new)
    }

    /// Event `{ω : pred(ω)}` by index.
    pub fn event_where(&self, pred: impl Fn(usize) -> bool) -> Event {
        Event((0..self.len()).filter(|i| pred(*i)).collect())
    }

    pub fn whole(&self) -> Event {
        Event((0..self.len()).collect())
    }

    pub fn check_event(&self, a: &Event) -> Result<()> {
        match a.0.last() {
            Some(&i) if i >= self.len() => input(format!("event index {i} out of range")),
            _ => Ok(()),
        }
    }

    /// The random variable `ω ↦ label(ω)`.
    pub fn identity_variable(&self) -> RandomVariable {
        RandomVariable(self.points.clone())
    }

    pub fn variable(&self, values: Vec<f64>) -> Result<RandomVariable> {
        let x = RandomVariable::new(values)?;
        x.check(self)?;
        Ok(x)
    }
}

/// A real value per sample point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomVariable(Vec<f64>);

impl RandomVariable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return input("random variable values must be finite");
        }
        Ok(Self(values))
    }

    pub fn constant(c: f64, n: usize) -> Self {
        Self(vec![c; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check(&self, model: &FiniteModel) -> Result<()> {
        if self.0.len() != model.len() {
            return input(format!(
                "random variable has {} values for {} points",
                self.0.len(),
                model.len()
            ));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RandomVariable {
        RandomVariable(self.0.iter().map(|v| f(*v)).collect())
    }

    pub fn zip_with(&self, other: &RandomVariable, f: impl Fn(f64, f64) -> f64) -> RandomVariable {
        RandomVariable(self.0.iter().zip(&other.0).map(|(a, b)| f(*a, *b)).collect())
    }
}

/// Builds a model from point → probability maps, merging coincident labels.
fn from_maps(maps: Vec<BTreeMap<u64, f64>>) -> FiniteModel {
    let mut labels: Vec<u64> = maps.iter().flat_map(|m| m.keys().copied()).collect();
    labels.sort_unstable();
    labels.dedup();
    let measures = maps
        .iter()
        .map(|m| labels.iter().map(|l| m.get(l).copied().unwrap_or(0.0)).collect())
        .collect();
    let points = labels.iter().map(|l| *l as f64).collect();
    FiniteModel::new(points, measures).expect("example family is well formed")
}

/// `P₁ = δ₁`; `Pₙ({1}) = 1 − 1/n`, `Pₙ({n}) = 1/n` for `n = 2..=N`, on
/// `{1, …, N}`.
pub fn exm2(n_max: usize) -> FiniteModel {
    let n_max = n_max.max(2);
    let mut maps = vec![BTreeMap::from([(1u64, 1.0)])];
    for n in 2..=n_max as u64 {
        let p = 1.0 / n as f64;
        maps.push(BTreeMap::from([(1, 1.0 - p), (n, p)]));
    }
    from_maps(maps)
}

/// `P₁ = δ₁`; `Pₙ({1}) = 1 − 1/n²`, `Pₙ({kn}) = 1/n³` for `k = 1..=n`,
/// `n = 2..=N`.
pub fn exm3(n_max: usize) -> FiniteModel {
    let n_max = n_max.max(2);
    let mut maps = vec![BTreeMap::from([(1u64, 1.0)])];
    for n in 2..=n_max as u64 {
        let nf = n as f64;
        let mut m = BTreeMap::from([(1u64, 1.0 - 1.0 / (nf * nf))]);
        for k in 1..=n {
            *m.entry(k * n).or_insert(0.0) += 1.0 / (nf * nf * nf);
        }
        maps.push(m);
    }
    from_maps(maps)
}

/// `{0, 1/M, …, 1}` with every Dirac measure.
pub fn exm1(m: usize) -> FiniteModel {
    let m = m.max(1);
    let points: Vec<f64> = (0..=m).map(|k| k as f64 / m as f64).collect();
    let measures = (0..=m)
        .map(|j| (0..=m).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let labels = (0..=m).map(|k| format!("delta_{k}/{m}")).collect();
    FiniteModel::with_labels(points, measures, labels).expect("example family is well formed")
}

/// Structured config document: points, measures and named variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub points: Vec<f64>,
    pub measures: Vec<MeasureSpec>,
    #[serde(default)]
    pub variables: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    #[serde(default)]
    pub label: Option<String>,
    pub probs: Vec<f64>,
}

impl ModelConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| crate::Error::Input(format!("model config: {e}")))
    }

    pub fn build(&self) -> Result<(FiniteModel, BTreeMap<String, RandomVariable>)> {
        let labels = self
            .measures
            .iter()
            .enumerate()
            .map(|(k, m)| m.label.clone().unwrap_or_else(|| format!("P{}", k + 1)))
            .collect();
        let model = FiniteModel::with_labels(
            self.points.clone(),
            self.measures.iter().map(|m| m.probs.clone()).collect(),
            labels,
        )?;
        let vars = self
            .variables
            .iter()
            .map(|(k, v)| Ok((k.clone(), model.variable(v.clone())?)))
            .collect::<Result<_>>()?;
        Ok((model, vars))
    }
}
