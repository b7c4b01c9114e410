//! Token pricing and the per-evaluation cost ledger.
//!
//! Prices are held as integer micro-dollars per million tokens and costs as
//! integer pico-dollars, so totals are exact and independent of the order in
//! which entries arrive.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LlmError;

const DEFAULT_PRICING: &str = include_str!("../../assets/pricing.toml");

/// Price of one model, in micro-dollars per million tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Price {
    pub input_micro: u64,
    pub output_micro: u64,
}

impl Price {
    /// Cost in pico-dollars: tokens × (µ$ / 1M tokens) = tokens × p$ exactly.
    pub fn cost_pico(&self, input_tokens: u64, output_tokens: u64) -> u128 {
        input_tokens as u128 * self.input_micro as u128
            + output_tokens as u128 * self.output_micro as u128
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PricingTable {
    models: BTreeMap<String, Price>,
}

#[derive(Deserialize)]
struct PricingFile {
    models: BTreeMap<String, PriceRow>,
}

#[derive(Deserialize)]
struct PriceRow {
    input_per_million: f64,
    output_per_million: f64,
}

fn to_micro(usd: f64, what: &str) -> Result<u64, LlmError> {
    if !usd.is_finite() || usd < 0.0 {
        return Err(LlmError::Config(format!("price for {what} must be a nonnegative number")));
    }
    Ok((usd * 1e6).round() as u64)
}

impl PricingTable {
    pub fn parse(text: &str) -> Result<Self, LlmError> {
        let file: PricingFile =
            toml::from_str(text).map_err(|e| LlmError::Config(format!("pricing: {e}")))?;
        let mut models = BTreeMap::new();
        for (id, row) in file.models {
            let price = Price {
                input_micro: to_micro(row.input_per_million, &id)?,
                output_micro: to_micro(row.output_per_million, &id)?,
            };
            models.insert(id, price);
        }
        Ok(Self { models })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, model_id: &str, input_per_million: f64, output_per_million: f64) {
        self.models.insert(
            model_id.to_string(),
            Price {
                input_micro: (input_per_million * 1e6).round() as u64,
                output_micro: (output_per_million * 1e6).round() as u64,
            },
        );
    }

    pub fn price(&self, model_id: &str) -> Option<Price> {
        self.models.get(model_id).copied()
    }

    pub fn models(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }
}

impl Default for PricingTable {
    fn default() -> Self {
        Self::parse(DEFAULT_PRICING).expect("bundled pricing parses")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEntry {
    pub model_id: String,
    pub stage: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub usd: f64,
    #[serde(skip)]
    pub pico: u128,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelTotal {
    pub calls: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub usd: f64,
    #[serde(skip)]
    pub pico: u128,
}

/// Priced model calls of one evaluation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub entries: Vec<CostEntry>,
    pub totals: BTreeMap<String, ModelTotal>,
    pub total_usd: f64,
    #[serde(skip)]
    total_pico: u128,
}

pub fn pico_to_usd(pico: u128) -> f64 {
    pico as f64 / 1e12
}

/// Append one priced call to `ledger`.
pub fn record_cost(
    ledger: &mut CostLedger,
    pricing: &PricingTable,
    model_id: &str,
    stage: &str,
    usage: Usage,
) -> Result<(), LlmError> {
    let price = pricing
        .price(model_id)
        .ok_or_else(|| LlmError::UnknownModel(model_id.to_string()))?;
    let pico = price.cost_pico(usage.input_tokens, usage.output_tokens);
    ledger.entries.push(CostEntry {
        model_id: model_id.to_string(),
        stage: stage.to_string(),
        input_tokens: usage.input_tokens,
        output_tokens: usage.output_tokens,
        usd: pico_to_usd(pico),
        pico,
    });
    let t = ledger.totals.entry(model_id.to_string()).or_default();
    t.calls += 1;
    t.input_tokens += usage.input_tokens;
    t.output_tokens += usage.output_tokens;
    t.pico += pico;
    t.usd = pico_to_usd(t.pico);
    ledger.total_pico += pico;
    ledger.total_usd = pico_to_usd(ledger.total_pico);
    Ok(())
}

impl CostLedger {
    pub fn total_pico(&self) -> u128 {
        self.total_pico
    }

    pub fn total_tokens(&self) -> Usage {
        self.entries.iter().fold(Usage::default(), |acc, e| Usage {
            input_tokens: acc.input_tokens + e.input_tokens,
            output_tokens: acc.output_tokens + e.output_tokens,
        })
    }

    /// A copy with entries in canonical order, so concurrent stages that
    /// finished in different orders serialize identically.
    pub fn snapshot(&self) -> CostLedger {
        let mut s = self.clone();
        s.entries.sort_by(|a, b| {
            (&a.stage, &a.model_id, a.input_tokens, a.output_tokens)
                .cmp(&(&b.stage, &b.model_id, b.input_tokens, b.output_tokens))
        });
        s
    }

    /// Stage name → usd, for the cost breakdown table.
    pub fn by_stage(&self) -> BTreeMap<String, f64> {
        let mut acc: BTreeMap<String, u128> = BTreeMap::new();
        for e in &self.entries {
            *acc.entry(e.stage.clone()).or_default() += e.pico;
        }
        acc.into_iter().map(|(k, v)| (k, pico_to_usd(v))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn usage(i: u64, o: u64) -> Usage {
        Usage {
            input_tokens: i,
            output_tokens: o,
        }
    }

    #[test]
    fn zero_tokens_cost_nothing() {
        let mut ledger = CostLedger::default();
        record_cost(&mut ledger, &PricingTable::default(), "gpt-4o", "x", usage(0, 0)).unwrap();
        assert_eq!(ledger.total_usd, 0.0);
        assert_eq!(ledger.entries.len(), 1);
    }

    #[test]
    fn one_million_each_way() {
        let mut pricing = PricingTable::default();
        pricing.set("toy", 1.0, 2.0);
        let mut ledger = CostLedger::default();
        record_cost(&mut ledger, &pricing, "toy", "x", usage(1_000_000, 1_000_000)).unwrap();
        assert_eq!(ledger.total_usd, 3.0);
        assert_eq!(ledger.totals["toy"].usd, 3.0);
    }

    #[test]
    fn unknown_model_is_rejected() {
        let mut ledger = CostLedger::default();
        let err = record_cost(&mut ledger, &PricingTable::default(), "nope", "x", usage(1, 1));
        assert_eq!(err, Err(LlmError::UnknownModel("nope".into())));
        assert!(ledger.entries.is_empty());
    }

    #[test]
    fn bundled_prices() {
        let p = PricingTable::default();
        assert_eq!(
            p.price("gemini-2.0-flash"),
            Some(Price {
                input_micro: 100_000,
                output_micro: 400_000
            })
        );
        assert_eq!(p.price("gpt-4o").unwrap().output_micro, 10_000_000);
    }
}
