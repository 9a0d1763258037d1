use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoder::{Encoder, EncoderConfig, FreezeSpec, LoraConfig};
use crate::error::{Error, Result};
use crate::eval::{format_params, render_columns, rounded_params, with_commas};
use crate::heads::{Head, HeadConfig};
use crate::numerics::{ParamGroup, ParamInfo};

/// The six detector architectures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    FullFinetune,
    LoraFrozen,
    LoraLongcontext,
    BilstmUnfrozen2,
    GruFrozen,
    BilstmFrozen,
}

impl VariantName {
    pub const ALL: [VariantName; 6] = [
        VariantName::FullFinetune,
        VariantName::LoraFrozen,
        VariantName::LoraLongcontext,
        VariantName::BilstmUnfrozen2,
        VariantName::GruFrozen,
        VariantName::BilstmFrozen,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VariantName::FullFinetune => "full_finetune",
            VariantName::LoraFrozen => "lora_frozen",
            VariantName::LoraLongcontext => "lora_longcontext",
            VariantName::BilstmUnfrozen2 => "bilstm_unfrozen2",
            VariantName::GruFrozen => "gru_frozen",
            VariantName::BilstmFrozen => "bilstm_frozen",
        }
    }

    pub fn valid_names() -> String {
        VariantName::ALL.map(VariantName::as_str).join(", ")
    }
}

impl fmt::Display for VariantName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariantName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VariantName::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::UnknownVariant {
                name: s.to_string(),
                valid: VariantName::valid_names(),
            })
    }
}

/// Encoder size preset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// RoBERTa-base dimensions, for parameter accounting.
    Base,
    /// Trains on a CPU in seconds.
    Desk,
}

impl Preset {
    pub fn encoder(self) -> EncoderConfig {
        match self {
            Preset::Base => EncoderConfig::base(),
            Preset::Desk => EncoderConfig::desk(),
        }
    }

    /// Recurrent head width: 256 at base scale, 16 on the desk preset.
    pub fn head_hidden(self) -> usize {
        match self {
            Preset::Base => 256,
            Preset::Desk => 16,
        }
    }

    /// `(max_positions, window)` for the long-context variant.
    pub fn long_context(self) -> (usize, usize) {
        match self {
            Preset::Base => (4098, 513),
            Preset::Desk => (1026, 33),
        }
    }
}

/// Optional changes applied on top of a variant's defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub head_hidden: Option<usize>,
    pub head_layers: Option<usize>,
    pub dropout: Option<f64>,
    pub lora_rank: Option<usize>,
    pub vocab_size: Option<usize>,
    pub attention_window: Option<usize>,
}

/// Everything needed to build a model: encoder shape, freezing, adapters
/// and head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub name: VariantName,
    pub encoder: EncoderConfig,
    pub freeze: FreezeSpec,
    pub lora: Option<LoraConfig>,
    pub head: HeadConfig,
}

pub fn variant_spec(name: VariantName, preset: Preset, ov: &Overrides) -> Result<VariantSpec> {
    let mut encoder = preset.encoder();
    let recurrent = |base: HeadConfig| HeadConfig {
        hidden_size: preset.head_hidden(),
        ..base
    };
    let lora = || LoraConfig::with_rank(ov.lora_rank.unwrap_or(20));
    let (freeze, lora, mut head) = match name {
        VariantName::FullFinetune => (FreezeSpec::all_trainable(), None, HeadConfig::linear()),
        VariantName::LoraFrozen => (FreezeSpec::all_frozen(), Some(lora()), HeadConfig::linear()),
        VariantName::LoraLongcontext => {
            let (p, w) = preset.long_context();
            encoder.max_positions = p;
            encoder.attention_window = w;
            (FreezeSpec::all_frozen(), Some(lora()), HeadConfig::linear())
        }
        VariantName::BilstmUnfrozen2 => (
            FreezeSpec::top_k_unfrozen(2),
            None,
            recurrent(HeadConfig::bilstm()),
        ),
        VariantName::GruFrozen => (FreezeSpec::all_frozen(), None, recurrent(HeadConfig::bigru())),
        VariantName::BilstmFrozen => (FreezeSpec::all_frozen(), None, recurrent(HeadConfig::bilstm())),
    };
    if let Some(h) = ov.head_hidden {
        head.hidden_size = h;
    }
    if let Some(l) = ov.head_layers {
        head.num_layers = l;
    }
    if let Some(d) = ov.dropout {
        head.dropout = d;
    }
    if let Some(v) = ov.vocab_size {
        encoder.vocab_size = v;
    }
    if let Some(w) = ov.attention_window {
        encoder.attention_window = w;
    }
    let spec = VariantSpec {
        name,
        encoder,
        freeze,
        lora,
        head,
    };
    spec.validate()?;
    Ok(spec)
}

impl VariantSpec {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.freeze.validate(self.encoder.num_layers)?;
        if let Some(l) = &self.lora {
            l.validate()?;
        }
        self.head.validate()
    }

    /// Parameter layout of encoder and head without allocating anything.
    pub fn layout(&self) -> Vec<ParamInfo> {
        let mut out = Encoder::<f32>::layout(&self.encoder, self.lora.as_ref(), &self.freeze);
        out.extend(Head::<f32>::layout(&self.head, self.encoder.model_dim));
        out
    }

    pub fn audit(&self) -> ParamAudit {
        ParamAudit::from_infos(self.name.as_str(), &self.layout())
    }
}

/// Trainable parameters by group.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamAudit {
    pub variant: String,
    pub backbone: usize,
    pub adapter: usize,
    pub head: usize,
    pub total: usize,
    pub rounded: String,
}

impl ParamAudit {
    pub fn from_infos(variant: &str, infos: &[ParamInfo]) -> Self {
        let sum = |g: ParamGroup| -> usize {
            infos
                .iter()
                .filter(|p| !p.frozen && p.group == g)
                .map(ParamInfo::numel)
                .sum()
        };
        let (backbone, adapter, head) = (sum(ParamGroup::Backbone), sum(ParamGroup::Adapter), sum(ParamGroup::Head));
        let total = backbone + adapter + head;
        ParamAudit {
            variant: variant.to_string(),
            backbone,
            adapter,
            head,
            total,
            rounded: rounded_params(total),
        }
    }
}

pub fn render_audit(rows: &[ParamAudit]) -> String {
    let body: Vec<[String; 5]> = rows
        .iter()
        .map(|a| {
            [
                a.variant.clone(),
                with_commas(a.backbone),
                with_commas(a.adapter),
                with_commas(a.head),
                format_params(a.total),
            ]
        })
        .collect();
    render_columns(&["Variant", "Encoder", "Adapters", "Head", "Trainable"], &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(name: VariantName) -> ParamAudit {
        variant_spec(name, Preset::Base, &Overrides::default()).unwrap().audit()
    }

    #[test]
    fn base_counts() {
        assert_eq!(base(VariantName::BilstmFrozen).total, 3_675_138);
        assert_eq!(base(VariantName::GruFrozen).total, 2_756_610);
        let u2 = base(VariantName::BilstmUnfrozen2);
        assert_eq!((u2.backbone, u2.head, u2.total), (14_175_744, 3_675_138, 17_850_882));
        assert_eq!(u2.rounded, "18M");
        let lora = base(VariantName::LoraFrozen);
        assert_eq!((lora.backbone, lora.adapter, lora.head), (0, 737_280, 1_538));
        assert_eq!(lora.rounded, "0.7M");
        let full = base(VariantName::FullFinetune).total as f64;
        assert!((full - 124e6).abs() / 124e6 < 0.02, "{full}");
    }

    #[test]
    fn desk_frozen_encoder_contributes_nothing() {
        let spec = variant_spec(
            VariantName::BilstmFrozen,
            Preset::Desk,
            &Overrides {
                head_hidden: Some(8),
                ..Overrides::default()
            },
        )
        .unwrap();
        assert_eq!(spec.audit().backbone, 0);
        assert_eq!(spec.head.hidden_size, 8);
    }

    #[test]
    fn names_parse() {
        for v in VariantName::ALL {
            assert_eq!(v.as_str().parse::<VariantName>().unwrap(), v);
        }
        let err = "bilstm".parse::<VariantName>().unwrap_err().to_string();
        assert!(err.contains("bilstm_frozen") && err.contains("lora_longcontext"));
    }

    #[test]
    fn long_context_has_window() {
        for p in [Preset::Base, Preset::Desk] {
            let s = variant_spec(VariantName::LoraLongcontext, p, &Overrides::default()).unwrap();
            assert!(s.encoder.attention_window > 0);
            assert!(s.encoder.max_positions > p.encoder().max_positions);
        }
    }
}
