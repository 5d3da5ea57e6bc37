use std::collections::BTreeMap;
use std::fmt;

use super::ModelError;

/// Transformer shape and the number of latent classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_enc_layers: usize,
    pub n_dec_layers: usize,
    pub d_ff: usize,
    pub dropout_p: f64,
    pub max_len: usize,
    /// Number of latent classes.
    pub k: usize,
}

impl ModelConfig {
    /// Default CPU configuration.
    pub fn desk(vocab_size: usize, k: usize) -> Self {
        Self {
            vocab_size,
            d_model: 128,
            n_heads: 4,
            n_enc_layers: 3,
            n_dec_layers: 3,
            d_ff: 256,
            dropout_p: 0.1,
            max_len: 256,
            k,
        }
    }

    /// Small configuration for synthetic tasks and tests.
    pub fn toy(vocab_size: usize, k: usize) -> Self {
        Self {
            vocab_size,
            d_model: 32,
            n_heads: 2,
            n_enc_layers: 2,
            n_dec_layers: 2,
            d_ff: 64,
            dropout_p: 0.1,
            max_len: 128,
            k,
        }
    }

    /// Gradient-check configuration.
    pub fn tiny(vocab_size: usize, k: usize) -> Self {
        Self {
            vocab_size,
            d_model: 8,
            n_heads: 2,
            n_enc_layers: 1,
            n_dec_layers: 1,
            d_ff: 16,
            dropout_p: 0.1,
            max_len: 16,
            k,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.vocab_size < 3 {
            return bad(format!("vocab_size {} leaves no room for the 3 reserved ids", self.vocab_size));
        }
        if self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return bad(format!("d_model {} is not divisible by n_heads {}", self.d_model, self.n_heads));
        }
        if self.d_ff == 0 || self.max_len == 0 {
            return bad("d_ff and max_len must be positive".into());
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad(format!("dropout_p {} not in [0, 1)", self.dropout_p));
        }
        Ok(())
    }

    /// Closed-form trainable parameter count:
    ///
    /// `V·d + K·d + L_e·(4d² + 4d + 2d·f + f + d + 4d) + 2d
    ///  + L_d·(8d² + 8d + 2d·f + f + d + 6d) + 2d + d·V + V`
    ///
    /// (embeddings, latents, encoder layers, encoder norm, decoder layers, decoder
    /// norm, output projection). Positional encodings are fixed and not counted.
    pub fn param_count(&self) -> usize {
        let (v, d, f, k) = (self.vocab_size, self.d_model, self.d_ff, self.k);
        let attn = 4 * d * d + 4 * d;
        let ffn = 2 * d * f + f + d;
        let enc = attn + ffn + 4 * d;
        let dec = 2 * attn + ffn + 6 * d;
        v * d + k * d + self.n_enc_layers * enc + 2 * d + self.n_dec_layers * dec + 2 * d + d * v + v
    }

    /// `key=value` pairs, one per field, in a fixed order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("vocab_size", self.vocab_size.to_string()),
            ("d_model", self.d_model.to_string()),
            ("n_heads", self.n_heads.to_string()),
            ("n_enc_layers", self.n_enc_layers.to_string()),
            ("n_dec_layers", self.n_dec_layers.to_string()),
            ("d_ff", self.d_ff.to_string()),
            ("dropout_p", self.dropout_p.to_string()),
            ("max_len", self.max_len.to_string()),
            ("k", self.k.to_string()),
        ]
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self, ModelError> {
        let get = |key: &str| -> Result<&str, ModelError> {
            pairs
                .get(key)
                .map(String::as_str)
                .ok_or_else(|| ModelError::InvalidConfig(format!("missing {key}")))
        };
        let int = |key: &str| -> Result<usize, ModelError> {
            get(key)?
                .parse()
                .map_err(|_| ModelError::InvalidConfig(format!("{key} is not an integer")))
        };
        let cfg = Self {
            vocab_size: int("vocab_size")?,
            d_model: int("d_model")?,
            n_heads: int("n_heads")?,
            n_enc_layers: int("n_enc_layers")?,
            n_dec_layers: int("n_dec_layers")?,
            d_ff: int("d_ff")?,
            dropout_p: get("dropout_p")?
                .parse()
                .map_err(|_| ModelError::InvalidConfig("dropout_p is not a number".into()))?,
            max_len: int("max_len")?,
            k: int("k")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.to_pairs().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(" "))
    }
}
