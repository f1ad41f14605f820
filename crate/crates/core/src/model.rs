//! The assembled network and its ablation variants.
//!
//! Submodules and their parameter prefixes:
//!
//! | prefix         | role                                                   |
//! |----------------|--------------------------------------------------------|
//! | `fr.`          | full-reference extractor, applied to both inputs       |
//! | `nr.`          | no-reference extractor, fusion feature `F_NR`          |
//! | `inn.`         | invertible split `F_NR → (F_PR, F_PD)`                 |
//! | `head_shared.` | aggregation of `[F_R, F_D]` and `[F_PR, F_PD]`         |
//! | `head_nr.`     | aggregation of `F_NR`                                  |
//!
//! Without the invertible split the no-reference extractor carries two
//! independent linear heads of width `feature_dim / 2` whose outputs are
//! `F_PR` and `F_PD`, and `F_NR` is their concatenation.

use candle_core::{DType, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::aggregate::{AggregationHead, AggregationKind};
use crate::error::{Error, Result};
use crate::nets::{fr_extract, nr_extract, Extractor, InvertibleStack, NetConfig};
use crate::seed::{self, Stream};
use crate::tensor::{NamedVar, DEVICE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    /// Full-reference branch and the pseudo features it supervises.
    pub pseudo_reference: bool,
    /// Split `F_NR` with the invertible stack instead of two direct heads.
    pub invertible: bool,
    pub triplet: bool,
    pub aggregation: AggregationKind,
}

impl Default for Variant {
    fn default() -> Self {
        Variant::FULL
    }
}

impl Variant {
    pub const FULL: Variant = Variant {
        pseudo_reference: true,
        invertible: true,
        triplet: true,
        aggregation: AggregationKind::Gru,
    };

    /// The six ablation configurations in table order.
    pub fn ablation_rows() -> [Variant; 6] {
        let full = Variant::FULL;
        [
            Variant {
                pseudo_reference: false,
                invertible: false,
                triplet: false,
                aggregation: AggregationKind::Gru,
            },
            Variant { invertible: false, ..full },
            Variant { triplet: false, ..full },
            Variant {
                aggregation: AggregationKind::Mean,
                ..full
            },
            Variant {
                aggregation: AggregationKind::PerPatchWeight,
                ..full
            },
            full,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if !self.pseudo_reference && (self.invertible || self.triplet) {
            return Err(Error::Config(
                "invertible split and triplet loss need the pseudo-reference branch".into(),
            ));
        }
        Ok(())
    }

    /// Short stable tag, e.g. `pr+inn+trip/gru`.
    pub fn tag(&self) -> String {
        let mut parts = Vec::new();
        if self.pseudo_reference {
            parts.push("pr");
        }
        if self.invertible {
            parts.push("inn");
        }
        if self.triplet {
            parts.push("trip");
        }
        if parts.is_empty() {
            parts.push("nr");
        }
        format!("{}/{}", parts.join("+"), self.aggregation.name())
    }
}

/// Outputs of one training forward pass over `g` groups of `t` patches.
#[derive(Debug, Clone)]
pub struct TrainOutputs {
    /// Per-group scores `(g,)`.
    pub q_nr: Tensor,
    pub q_fr: Option<Tensor>,
    pub q_pr: Option<Tensor>,
    /// Per-patch features `(g * t, feature_dim / 2)`.
    pub f_r: Option<Tensor>,
    pub f_d: Option<Tensor>,
    pub f_pr: Option<Tensor>,
    pub f_pd: Option<Tensor>,
}

/// Per-patch feature sets of the four roles, `(n, feature_dim / 2)` each.
#[derive(Debug, Clone)]
pub struct FeatureBundle {
    pub f_r: Tensor,
    pub f_d: Tensor,
    pub f_nr: Tensor,
    pub f_pr: Tensor,
    pub f_pd: Tensor,
}

#[derive(Debug, Clone)]
pub struct QualityModel {
    pub config: NetConfig,
    pub variant: Variant,
    pub fr: Option<Extractor>,
    pub nr: Extractor,
    pub inn: Option<InvertibleStack>,
    pub head_shared: Option<AggregationHead>,
    pub head_nr: AggregationHead,
}

impl QualityModel {
    /// Weights drawn from the `Init` stream of `root_seed`.
    pub fn new(config: &NetConfig, variant: Variant, root_seed: u64) -> Result<Self> {
        config.validate()?;
        variant.validate()?;
        let dtype = DType::F32;
        let mut rng = seed::rng(root_seed, Stream::Init, &[]);
        let half = config.half_dim();
        let d = config.feature_dim;
        let fr = if variant.pseudo_reference {
            Some(Extractor::new(&config.conv_channels, &[half], &mut rng, dtype)?)
        } else {
            None
        };
        let nr_heads: &[usize] = if variant.pseudo_reference && !variant.invertible {
            &[half, half]
        } else {
            &[d]
        };
        let nr = Extractor::new(&config.conv_channels, nr_heads, &mut rng, dtype)?;
        let inn = if variant.invertible {
            Some(InvertibleStack::new(
                d,
                config.inn_blocks,
                config.inn_subnet_width,
                config.inn_clamp,
                &mut rng,
                dtype,
            )?)
        } else {
            None
        };
        let head_shared = if variant.pseudo_reference {
            Some(AggregationHead::new(variant.aggregation, d, config.gru_hidden, &mut rng, dtype)?)
        } else {
            None
        };
        let head_nr = AggregationHead::new(variant.aggregation, d, config.gru_hidden, &mut rng, dtype)?;
        let model = QualityModel {
            config: config.clone(),
            variant,
            fr,
            nr,
            inn,
            head_shared,
            head_nr,
        };
        model.set_quality_bias(config.quality_bias_init)?;
        Ok(model)
    }

    fn set_quality_bias(&self, value: f64) -> Result<()> {
        for head in self.head_shared.iter().chain(std::iter::once(&self.head_nr)) {
            let b = head.quality.bias.as_tensor();
            head.quality.bias.set(&(b.zeros_like()? + value)?)?;
        }
        Ok(())
    }

    /// All trainable tensors with stable dotted names, grouped by submodule.
    pub fn named_vars(&self) -> Vec<NamedVar> {
        let mut v = Vec::new();
        if let Some(fr) = &self.fr {
            v.extend(fr.named_vars("fr"));
        }
        v.extend(self.nr.named_vars("nr"));
        if let Some(inn) = &self.inn {
            v.extend(inn.named_vars("inn"));
        }
        if let Some(h) = &self.head_shared {
            v.extend(h.named_vars("head_shared"));
        }
        v.extend(self.head_nr.named_vars("head_nr"));
        v
    }

    pub fn vars(&self) -> Vec<Var> {
        self.named_vars().into_iter().map(|(_, v)| v).collect()
    }

    /// Submodule prefixes present in this variant.
    pub fn submodules(&self) -> Vec<&'static str> {
        let mut s = Vec::new();
        if self.fr.is_some() {
            s.push("fr");
        }
        s.push("nr");
        if self.inn.is_some() {
            s.push("inn");
        }
        if self.head_shared.is_some() {
            s.push("head_shared");
        }
        s.push("head_nr");
        s
    }

    fn pseudo_split(&self, f_nr: &Tensor) -> Result<(Tensor, Tensor)> {
        match &self.inn {
            Some(inn) => inn.forward(f_nr),
            None => {
                let half = self.config.half_dim();
                Ok((f_nr.narrow(1, 0, half)?, f_nr.narrow(1, half, half)?))
            }
        }
    }

    fn grouped(x: &Tensor, groups: usize) -> Result<Tensor> {
        let (n, d) = x.dims2()?;
        if groups == 0 || n % groups != 0 {
            return Err(Error::Shape(format!("{n} patches do not split into {groups} equal groups")));
        }
        Ok(x.reshape((groups, n / groups, d))?)
    }

    /// Forward pass over `groups` equal, contiguous groups of patch pairs.
    /// `reference` is ignored by variants without the pseudo-reference branch.
    pub fn forward_train(&self, reference: &Tensor, distorted: &Tensor, groups: usize) -> Result<TrainOutputs> {
        let f_nr = nr_extract(&self.nr, distorted)?;
        let (q_nr, _) = self.head_nr.forward(&Self::grouped(&f_nr, groups)?)?;
        let (Some(fr), Some(shared)) = (&self.fr, &self.head_shared) else {
            return Ok(TrainOutputs {
                q_nr,
                q_fr: None,
                q_pr: None,
                f_r: None,
                f_d: None,
                f_pr: None,
                f_pd: None,
            });
        };
        let (f_pr, f_pd) = self.pseudo_split(&f_nr)?;
        let (f_r, f_d) = fr_extract(fr, reference, distorted)?;
        let fr_cat = Tensor::cat(&[&f_r, &f_d], 1)?;
        let pr_cat = Tensor::cat(&[&f_pr, &f_pd], 1)?;
        let (q_fr, _) = shared.forward(&Self::grouped(&fr_cat, groups)?)?;
        let (q_pr, _) = shared.forward(&Self::grouped(&pr_cat, groups)?)?;
        Ok(TrainOutputs {
            q_nr,
            q_fr: Some(q_fr),
            q_pr: Some(q_pr),
            f_r: Some(f_r),
            f_d: Some(f_d),
            f_pr: Some(f_pr),
            f_pd: Some(f_pd),
        })
    }

    /// Image score from the distorted patches alone, `(Q, per-patch q)`.
    pub fn predict_nr(&self, distorted: &Tensor) -> Result<(f64, Vec<f64>)> {
        let f_nr = nr_extract(&self.nr, distorted)?;
        let (q, per) = self.head_nr.forward(&f_nr.unsqueeze(0)?)?;
        score_pair(&q, &per)
    }

    /// Full-reference image score through the shared head.
    pub fn predict_fr(&self, reference: &Tensor, distorted: &Tensor) -> Result<(f64, Vec<f64>)> {
        let (Some(fr), Some(shared)) = (&self.fr, &self.head_shared) else {
            return Err(Error::Usage(format!(
                "variant {} has no full-reference branch",
                self.variant.tag()
            )));
        };
        if reference.dims() != distorted.dims() {
            return Err(Error::Alignment(format!(
                "reference patches {:?} vs distorted {:?}",
                reference.dims(),
                distorted.dims()
            )));
        }
        let (f_r, f_d) = fr_extract(fr, reference, distorted)?;
        let (q, per) = shared.forward(&Tensor::cat(&[&f_r, &f_d], 1)?.unsqueeze(0)?)?;
        score_pair(&q, &per)
    }

    pub fn features(&self, reference: &Tensor, distorted: &Tensor) -> Result<FeatureBundle> {
        let Some(fr) = &self.fr else {
            return Err(Error::Usage(format!(
                "variant {} has no pseudo-reference features",
                self.variant.tag()
            )));
        };
        let f_nr = nr_extract(&self.nr, distorted)?;
        let (f_pr, f_pd) = self.pseudo_split(&f_nr)?;
        let (f_r, f_d) = fr_extract(fr, reference, distorted)?;
        Ok(FeatureBundle { f_r, f_d, f_nr, f_pr, f_pd })
    }
}

fn score_pair(q: &Tensor, per: &Tensor) -> Result<(f64, Vec<f64>)> {
    let q = q.to_dtype(DType::F64)?.to_vec1::<f64>()?[0];
    let per = per.to_dtype(DType::F64)?.flatten_all()?.to_vec1::<f64>()?;
    Ok((q, per))
}

/// Per-group labels as a tensor matching the model dtype.
pub fn labels(dmos: &[f64]) -> Result<Tensor> {
    Ok(Tensor::from_slice(dmos, dmos.len(), &DEVICE)?.to_dtype(DType::F32)?)
}
