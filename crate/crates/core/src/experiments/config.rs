use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::DataFormat;
use crate::embed::BackgroundSource;
use crate::error::{Error, Result};
use crate::llm::{EndpointConfig, PromptLanguage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    LexiconCount,
    LexiconProb,
    SemanticSim,
    Frameaxis,
    LlmFewshot,
    ExchangeIngest,
}

impl Approach {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::LexiconCount => "lexicon_count",
            Self::LexiconProb => "lexicon_prob",
            Self::SemanticSim => "semantic_sim",
            Self::Frameaxis => "frameaxis",
            Self::LlmFewshot => "llm_fewshot",
            Self::ExchangeIngest => "exchange_ingest",
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown approach {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub bench: PathBuf,
    #[serde(default)]
    pub format: Option<DataFormat>,
    /// Default language for records without one.
    #[serde(default)]
    pub language: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconConfig {
    pub path: PathBuf,
    /// Term sentiment scores used to assign virtue/vice.
    #[serde(default)]
    pub sentiment: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub path: PathBuf,
}

fn default_bootstrap() -> usize {
    crate::embed::DEFAULT_BOOTSTRAP
}
fn default_z() -> f64 {
    crate::embed::DEFAULT_Z_CRIT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameAxisConfig {
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_z")]
    pub z_crit: f64,
    #[serde(default)]
    pub background: BackgroundSource,
}

impl Default for FrameAxisConfig {
    fn default() -> Self {
        Self {
            bootstrap: default_bootstrap(),
            z_crit: default_z(),
            background: BackgroundSource::default(),
        }
    }
}

fn default_prompt_language() -> PromptLanguage {
    PromptLanguage::En
}
fn default_max_tokens() -> u32 {
    crate::llm::Decoding::default().max_tokens
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmConfig {
    pub endpoint: EndpointConfig,
    #[serde(default = "default_prompt_language")]
    pub prompt_language: PromptLanguage,
    #[serde(default)]
    pub culture: Option<String>,
    /// Dataset holding the few-shot exemplars.
    #[serde(default)]
    pub shots_file: Option<PathBuf>,
    /// Exemplar ids in prompt order.
    #[serde(default)]
    pub shot_ids: Vec<String>,
    #[serde(default)]
    pub shot_rationales: BTreeMap<String, String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExchangeConfig {
    pub predictions: PathBuf,
}

/// One experiment run. Relative paths resolve against the config file's
/// directory; `${VAR}` in any string is replaced from the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub approach: Approach,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub out: PathBuf,
    pub data: DataConfig,
    #[serde(default)]
    pub lexicon: Option<LexiconConfig>,
    #[serde(default)]
    pub embedding: Option<EmbeddingConfig>,
    #[serde(default)]
    pub frameaxis: FrameAxisConfig,
    #[serde(default)]
    pub llm: Option<LlmConfig>,
    #[serde(default)]
    pub exchange: Option<ExchangeConfig>,
}

/// Replaces each `${NAME}` with the environment value; unset names fail.
pub fn interpolate_env(s: &str) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find('}')
            .ok_or_else(|| Error::Config(format!("unterminated ${{ in {s:?}")))?;
        let name = &after[..end];
        let value = std::env::var(name).map_err(|_| Error::Config(format!("environment variable {name} is not set")))?;
        out.push_str(&value);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

fn interpolate_value(v: &mut toml::Value) -> Result<()> {
    match v {
        toml::Value::String(s) => *s = interpolate_env(s)?,
        toml::Value::Array(a) => a.iter_mut().try_for_each(interpolate_value)?,
        toml::Value::Table(t) => t.iter_mut().try_for_each(|(_, v)| interpolate_value(v))?,
        _ => {}
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut v: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        interpolate_value(&mut v)?;
        v.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    /// Parses, resolves relative paths against the file's directory and
    /// validates.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out);
        fix(&mut self.data.bench);
        if let Some(l) = &mut self.lexicon {
            fix(&mut l.path);
            if let Some(s) = &mut l.sentiment {
                fix(s);
            }
        }
        if let Some(e) = &mut self.embedding {
            fix(&mut e.path);
        }
        if let Some(l) = &mut self.llm {
            if let Some(s) = &mut l.shots_file {
                fix(s);
            }
        }
        if let Some(x) = &mut self.exchange {
            fix(&mut x.predictions);
        }
    }

    /// Checks that each approach has its sections and that every referenced
    /// file exists.
    pub fn validate(&self) -> Result<()> {
        let need = |present: bool, section: &str| {
            if present {
                Ok(())
            } else {
                Err(Error::Config(format!("approach {} requires [{section}]", self.approach)))
            }
        };
        match self.approach {
            Approach::LexiconCount | Approach::LexiconProb => need(self.lexicon.is_some(), "lexicon")?,
            Approach::SemanticSim | Approach::Frameaxis => {
                need(self.lexicon.is_some(), "lexicon")?;
                need(self.embedding.is_some(), "embedding")?;
            }
            Approach::LlmFewshot => {
                let llm = self.llm.as_ref().ok_or_else(|| Error::Config("approach llm_fewshot requires [llm]".into()))?;
                llm.endpoint.validate()?;
                if !llm.shot_ids.is_empty() && llm.shots_file.is_none() {
                    return Err(Error::Config("shot_ids given without shots_file".into()));
                }
            }
            Approach::ExchangeIngest => need(self.exchange.is_some(), "exchange")?,
        }
        if self.frameaxis.bootstrap < crate::embed::MIN_BOOTSTRAP {
            return Err(Error::Config(format!(
                "frameaxis.bootstrap must be at least {}",
                crate::embed::MIN_BOOTSTRAP
            )));
        }
        for p in self.inputs() {
            if !p.is_file() {
                return Err(Error::Config(format!("input {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Input files the run reads, in a fixed order.
    pub fn inputs(&self) -> Vec<&Path> {
        let mut v: Vec<&Path> = vec![&self.data.bench];
        if let Some(l) = &self.lexicon {
            v.push(&l.path);
            v.extend(l.sentiment.as_deref());
        }
        if let Some(e) = &self.embedding {
            v.push(&e.path);
        }
        if let Some(l) = &self.llm {
            v.extend(l.shots_file.as_deref());
        }
        if let Some(x) = &self.exchange {
            v.push(&x.predictions);
        }
        v
    }

    pub fn run_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.approach.to_string())
    }
}
