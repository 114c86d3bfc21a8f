use std::collections::{BTreeMap, HashMap};

use crate::corpus::{NerLabel, Sentence};
use crate::embeddings::EmbeddingTable;
use crate::matrix::Matrix;

use super::features::{sentence_features, FeatureConfig, FeatureVector};
use super::inference::{marginals, path_score, viterbi};
use super::{CrfError, CrfLabel, Task};

/// Feature indices and values for one position, unknown features dropped.
pub(crate) type CompiledPosition = Vec<(usize, f64)>;

#[derive(Clone, Debug, PartialEq)]
pub struct CrfModel {
    task: Task,
    labels: Vec<CrfLabel>,
    label_index: HashMap<CrfLabel, usize>,
    feature_names: Vec<String>,
    feature_index: HashMap<String, usize>,
    /// `F x L`, row per feature.
    state_weights: Matrix,
    /// `L x L`, `(from, to)`.
    transitions: Matrix,
    feature_config: FeatureConfig,
    embeddings: Option<EmbeddingTable>,
    pub trained_on: String,
}

/// Gradient of the NLL: sparse rows of state weights plus the dense
/// transition matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CrfGradient {
    pub state: BTreeMap<usize, Vec<f64>>,
    pub transitions: Matrix,
}

impl CrfGradient {
    pub fn zeros(labels: usize) -> Self {
        CrfGradient {
            state: BTreeMap::new(),
            transitions: Matrix::zeros(labels, labels),
        }
    }

    pub fn accumulate(&mut self, other: &CrfGradient) {
        for (&f, row) in &other.state {
            let dst = self.state.entry(f).or_insert_with(|| vec![0.0; row.len()]);
            for (d, s) in dst.iter_mut().zip(row) {
                *d += s;
            }
        }
        for (d, s) in self
            .transitions
            .as_mut_slice()
            .iter_mut()
            .zip(other.transitions.as_slice())
        {
            *d += s;
        }
    }
}

impl CrfModel {
    /// A model with all weights zero.
    pub fn new(
        task: Task,
        labels: Vec<CrfLabel>,
        feature_names: Vec<String>,
        feature_config: FeatureConfig,
        embeddings: Option<EmbeddingTable>,
    ) -> Result<Self, CrfError> {
        let l = labels.len();
        let f = feature_names.len();
        Self::from_parts(
            task,
            labels,
            feature_names,
            Matrix::zeros(f, l),
            Matrix::zeros(l, l),
            feature_config,
            embeddings,
            String::new(),
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        task: Task,
        labels: Vec<CrfLabel>,
        feature_names: Vec<String>,
        state_weights: Matrix,
        transitions: Matrix,
        feature_config: FeatureConfig,
        embeddings: Option<EmbeddingTable>,
        trained_on: String,
    ) -> Result<Self, CrfError> {
        let l = labels.len();
        if l == 0 {
            return Err(CrfError::Config("label set is empty".into()));
        }
        if state_weights.shape() != (feature_names.len(), l) || transitions.shape() != (l, l) {
            return Err(CrfError::Shape("weights do not match label/feature sets".into()));
        }
        if feature_config.use_embeddings && embeddings.is_none() {
            return Err(CrfError::MissingEmbeddings);
        }
        let label_index = labels.iter().enumerate().map(|(i, &y)| (y, i)).collect();
        let feature_index = feature_names
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i))
            .collect();
        Ok(CrfModel {
            task,
            labels,
            label_index,
            feature_names,
            feature_index,
            state_weights,
            transitions,
            feature_config,
            embeddings,
            trained_on,
        })
    }

    /// The 25 NER labels in canonical order.
    pub fn single_task_labels() -> Vec<CrfLabel> {
        NerLabel::all()
            .into_iter()
            .map(|ner| CrfLabel { ner, pos: None })
            .collect()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn labels(&self) -> &[CrfLabel] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_config(&self) -> FeatureConfig {
        self.feature_config
    }

    pub fn embeddings(&self) -> Option<&EmbeddingTable> {
        self.embeddings.as_ref()
    }

    pub fn state_weights(&self) -> &Matrix {
        &self.state_weights
    }

    pub fn state_weights_mut(&mut self) -> &mut Matrix {
        &mut self.state_weights
    }

    pub fn transitions(&self) -> &Matrix {
        &self.transitions
    }

    pub fn transitions_mut(&mut self) -> &mut Matrix {
        &mut self.transitions
    }

    pub fn feature_id(&self, key: &str) -> Option<usize> {
        self.feature_index.get(key).copied()
    }

    pub fn label_id(&self, label: CrfLabel) -> Option<usize> {
        self.label_index.get(&label).copied()
    }

    /// Gold label indices of a sentence under this model's label set.
    pub fn gold(&self, sentence: &Sentence) -> Result<Vec<usize>, CrfError> {
        sentence
            .tokens()
            .iter()
            .map(|t| {
                let label = CrfLabel {
                    ner: t.ner,
                    pos: (self.task == Task::Joint).then_some(t.pos),
                };
                self.label_id(label)
                    .ok_or_else(|| CrfError::UnknownLabel(label.to_string()))
            })
            .collect()
    }

    pub fn features(&self, surfaces: &[&str]) -> Result<Vec<FeatureVector>, CrfError> {
        sentence_features(surfaces, self.feature_config, self.embeddings.as_ref())
    }

    pub(crate) fn compile(&self, features: &[FeatureVector]) -> Vec<CompiledPosition> {
        features
            .iter()
            .map(|fv| {
                fv.iter()
                    .filter_map(|(k, v)| self.feature_id(k).map(|id| (id, v)))
                    .collect()
            })
            .collect()
    }

    /// Per-position label scores `w . f`; features without weights add 0.
    pub fn emissions(&self, features: &[FeatureVector]) -> Matrix {
        self.emissions_compiled(&self.compile(features))
    }

    pub(crate) fn emissions_compiled(&self, compiled: &[CompiledPosition]) -> Matrix {
        let l = self.labels.len();
        let mut em = Matrix::zeros(compiled.len(), l);
        for (t, feats) in compiled.iter().enumerate() {
            let row = em.row_mut(t);
            for &(f, v) in feats {
                for (r, w) in row.iter_mut().zip(self.state_weights.row(f)) {
                    *r += w * v;
                }
            }
        }
        em
    }

    /// Negative log-likelihood of `gold` and its gradient. A positive `l2`
    /// adds `l2/2 * |w|^2` over all weights, which makes the gradient dense
    /// over every feature row with a nonzero weight.
    pub fn nll_and_gradient(
        &self,
        features: &[FeatureVector],
        gold: &[usize],
        l2: f64,
    ) -> Result<(f64, CrfGradient), CrfError> {
        self.nll_and_gradient_compiled(&self.compile(features), gold, l2)
    }

    pub(crate) fn nll_and_gradient_compiled(
        &self,
        compiled: &[CompiledPosition],
        gold: &[usize],
        l2: f64,
    ) -> Result<(f64, CrfGradient), CrfError> {
        let l = self.labels.len();
        if gold.len() != compiled.len() {
            return Err(CrfError::Shape(format!(
                "{} gold labels for {} positions",
                gold.len(),
                compiled.len()
            )));
        }
        if let Some(&bad) = gold.iter().find(|&&y| y >= l) {
            return Err(CrfError::UnknownLabel(format!("index {bad}")));
        }
        let em = self.emissions_compiled(compiled);
        let m = marginals(&em, &self.transitions)?;
        let mut nll = m.log_z - path_score(&em, &self.transitions, gold);
        let mut grad = CrfGradient::zeros(l);
        for (t, feats) in compiled.iter().enumerate() {
            for &(f, v) in feats {
                let row = grad.state.entry(f).or_insert_with(|| vec![0.0; l]);
                for (y, g) in row.iter_mut().enumerate() {
                    *g += v * m.node.get(t, y);
                }
                row[gold[t]] -= v;
            }
        }
        for (t, edge) in m.edge.iter().enumerate() {
            for (g, e) in grad.transitions.as_mut_slice().iter_mut().zip(edge.as_slice()) {
                *g += e;
            }
            grad.transitions.add_at(gold[t], gold[t + 1], -1.0);
        }
        if l2 > 0.0 {
            nll += 0.5 * l2 * self.squared_norm();
            for f in 0..self.feature_names.len() {
                let w = self.state_weights.row(f);
                if w.iter().all(|&x| x == 0.0) {
                    continue;
                }
                let row = grad.state.entry(f).or_insert_with(|| vec![0.0; l]);
                for (g, x) in row.iter_mut().zip(w) {
                    *g += l2 * x;
                }
            }
            for (g, x) in grad
                .transitions
                .as_mut_slice()
                .iter_mut()
                .zip(self.transitions.as_slice())
            {
                *g += l2 * x;
            }
        }
        Ok((nll, grad))
    }

    pub fn squared_norm(&self) -> f64 {
        self.state_weights
            .as_slice()
            .iter()
            .chain(self.transitions.as_slice())
            .map(|w| w * w)
            .sum()
    }

    /// `w -= rate * grad`.
    pub fn apply_gradient(&mut self, grad: &CrfGradient, rate: f64) {
        for (&f, row) in &grad.state {
            for (w, g) in self.state_weights.row_mut(f).iter_mut().zip(row) {
                *w -= rate * g;
            }
        }
        for (w, g) in self
            .transitions
            .as_mut_slice()
            .iter_mut()
            .zip(grad.transitions.as_slice())
        {
            *w -= rate * g;
        }
    }

    /// Multiplies every weight by `factor`.
    pub(crate) fn scale_weights(&mut self, factor: f64) {
        for w in self
            .state_weights
            .as_mut_slice()
            .iter_mut()
            .chain(self.transitions.as_mut_slice())
        {
            *w *= factor;
        }
    }

    /// Viterbi decoding into the model's label space.
    pub fn tag_labels(&self, surfaces: &[&str]) -> Result<Vec<CrfLabel>, CrfError> {
        let em = self.emissions(&self.features(surfaces)?);
        let (path, _) = viterbi(&em, &self.transitions)?;
        Ok(path.into_iter().map(|y| self.labels[y]).collect())
    }

    /// NER predictions; joint labels are projected onto their NER part.
    pub fn tag(&self, surfaces: &[&str]) -> Result<Vec<NerLabel>, CrfError> {
        Ok(self
            .tag_labels(surfaces)?
            .into_iter()
            .map(|y| y.ner)
            .collect())
    }
}

/// Tags a sentence with a trained CRF, returning NER labels only.
pub fn tag_crf(model: &CrfModel, sentence: &Sentence) -> Result<Vec<NerLabel>, CrfError> {
    model.tag(&sentence.surfaces())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PosTag;
    use crate::crf::inference::tests::all_paths;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_model(rng: &mut ChaCha8Rng, labels: usize, features: usize) -> CrfModel {
        let labels: Vec<CrfLabel> = CrfModel::single_task_labels().into_iter().take(labels).collect();
        let names: Vec<String> = (0..features).map(|i| format!("f{i}")).collect();
        let mut m = CrfModel::new(Task::Single, labels, names, FeatureConfig::default(), None).unwrap();
        for w in m.state_weights_mut().as_mut_slice() {
            *w = rng.gen_range(-1.0..1.0);
        }
        for w in m.transitions_mut().as_mut_slice() {
            *w = rng.gen_range(-1.0..1.0);
        }
        m
    }

    fn random_features(rng: &mut ChaCha8Rng, t_len: usize, features: usize) -> Vec<FeatureVector> {
        (0..t_len)
            .map(|_| {
                let mut fv = FeatureVector::new();
                for _ in 0..3 {
                    let k = rng.gen_range(0..features);
                    fv.insert(format!("f{k}"), rng.gen_range(-1.5..1.5));
                }
                fv
            })
            .collect()
    }

    #[test]
    fn zero_model_nll_is_uniform() {
        let names = vec!["a".to_string()];
        let m = CrfModel::new(
            Task::Single,
            CrfModel::single_task_labels(),
            names,
            FeatureConfig::default(),
            None,
        )
        .unwrap();
        let feats = m.features(&["x", "y", "z"]).unwrap();
        let (nll, _) = m.nll_and_gradient(&feats, &[0, 3, 1], 0.0).unwrap();
        assert!((nll - 3.0 * 25f64.ln()).abs() < 1e-12);
        assert_eq!(m.emissions(&feats), Matrix::zeros(3, 25));
    }

    #[test]
    fn emission_of_single_weighted_feature() {
        let labels: Vec<CrfLabel> = CrfModel::single_task_labels().into_iter().take(3).collect();
        let mut m = CrfModel::new(
            Task::Single,
            labels,
            vec!["w0=a".into()],
            FeatureConfig::default(),
            None,
        )
        .unwrap();
        m.state_weights_mut().set(0, 1, 2.0);
        let mut fv = FeatureVector::new();
        fv.indicator("w0=a");
        fv.indicator("unseen");
        let em = m.emissions(&[fv]);
        assert_eq!(em.row(0), &[0.0, 2.0, 0.0]);
    }

    #[test]
    fn emissions_match_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = tiny_model(&mut rng, 4, 12);
        let feats = random_features(&mut rng, 3, 12);
        let em = m.emissions(&feats);
        for (t, fv) in feats.iter().enumerate() {
            for y in 0..4 {
                let mut s = 0.0;
                for (k, v) in fv.iter() {
                    let f: usize = k[1..].parse().unwrap();
                    s += m.state_weights().get(f, y) * v;
                }
                assert!((em.get(t, y) - s).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..6 {
            let t_len = 1 + trial % 4;
            let l = 2 + trial % 2;
            let m = tiny_model(&mut rng, l, 20);
            let feats = random_features(&mut rng, t_len, 20);
            let gold: Vec<usize> = (0..t_len).map(|_| rng.gen_range(0..l)).collect();
            let l2 = if trial % 2 == 0 { 0.0 } else { 0.3 };
            let (_, grad) = m.nll_and_gradient(&feats, &gold, l2).unwrap();
            let h = 1e-5;
            let nll = |m: &CrfModel| m.nll_and_gradient(&feats, &gold, l2).unwrap().0;
            for f in 0..20 {
                for y in 0..l {
                    let mut plus = m.clone();
                    plus.state_weights_mut().add_at(f, y, h);
                    let mut minus = m.clone();
                    minus.state_weights_mut().add_at(f, y, -h);
                    let fd = (nll(&plus) - nll(&minus)) / (2.0 * h);
                    let an = grad.state.get(&f).map_or(0.0, |r| r[y]);
                    assert!((fd - an).abs() < 1e-6, "f{f} y{y}: {fd} vs {an}");
                }
            }
            for i in 0..l {
                for j in 0..l {
                    let mut plus = m.clone();
                    plus.transitions_mut().add_at(i, j, h);
                    let mut minus = m.clone();
                    minus.transitions_mut().add_at(i, j, -h);
                    let fd = (nll(&plus) - nll(&minus)) / (2.0 * h);
                    assert!((fd - grad.transitions.get(i, j)).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn data_gradient_touches_only_present_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = tiny_model(&mut rng, 3, 20);
        let feats = random_features(&mut rng, 2, 20);
        let (_, grad) = m.nll_and_gradient(&feats, &[0, 1], 0.0).unwrap();
        let present: std::collections::BTreeSet<usize> = feats
            .iter()
            .flat_map(|fv| fv.iter().map(|(k, _)| k[1..].parse::<usize>().unwrap()))
            .collect();
        assert_eq!(grad.state.keys().copied().collect::<std::collections::BTreeSet<_>>(), present);
    }

    #[test]
    fn nll_is_nonnegative_and_probability_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let m = tiny_model(&mut rng, 3, 10);
            let feats = random_features(&mut rng, 3, 10);
            for path in all_paths(3, 3) {
                let (nll, _) = m.nll_and_gradient(&feats, &path, 0.0).unwrap();
                assert!(nll >= 0.0);
                let p = (-nll).exp();
                assert!(p > 0.0 && p <= 1.0);
            }
        }
    }

    #[test]
    fn unknown_label_is_error() {
        let labels = vec![CrfLabel {
            ner: NerLabel::Outside,
            pos: Some(PosTag::N),
        }];
        let m = CrfModel::new(Task::Joint, labels, vec![], FeatureConfig::default(), None).unwrap();
        let s = crate::corpus::parse_conll("a\tv\tO\n", true).unwrap();
        assert!(matches!(m.gold(&s.sentences[0]), Err(CrfError::UnknownLabel(_))));
        assert!(matches!(
            m.nll_and_gradient(&m.features(&["a"]).unwrap(), &[3], 0.0),
            Err(CrfError::UnknownLabel(_))
        ));
    }

    #[test]
    fn joint_projection_to_ner() {
        let label = CrfLabel {
            ner: "B-ORG".parse().unwrap(),
            pos: Some(PosTag::N),
        };
        let m = CrfModel::new(Task::Joint, vec![label], vec![], FeatureConfig::default(), None).unwrap();
        assert_eq!(m.tag(&["x"]).unwrap(), vec!["B-ORG".parse::<NerLabel>().unwrap()]);
        assert_eq!(label.to_string(), "B-ORG|n");
        assert_eq!(CrfLabel::parse("B-ORG|n"), Some(label));
    }
}
