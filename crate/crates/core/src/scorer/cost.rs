use crate::scalar::{rational_from_decimal, Rational, Scalar};

pub const DEFAULT_INPUT_TOKENS: u64 = 1300;
pub const DEFAULT_OUTPUT_TOKENS: u64 = 300;

/// Per-token prices and the assumed token budget of one comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel<T> {
    pub input_price: T,
    pub output_price: T,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl<T: Scalar> CostModel<T> {
    pub fn new(input_price: T, output_price: T) -> Self {
        CostModel { input_price, output_price, input_tokens: DEFAULT_INPUT_TOKENS, output_tokens: DEFAULT_OUTPUT_TOKENS }
    }

    /// Per-token rates that reproduce given per-comparison input/output costs at
    /// the default token budget.
    pub fn from_per_comparison(input_cost: T, output_cost: T) -> Self {
        Self::new(
            input_cost / T::from_u64_exact(DEFAULT_INPUT_TOKENS),
            output_cost / T::from_u64_exact(DEFAULT_OUTPUT_TOKENS),
        )
    }

    pub fn input_cost(&self) -> T {
        T::from_u64_exact(self.input_tokens) * self.input_price.clone()
    }

    pub fn output_cost(&self) -> T {
        T::from_u64_exact(self.output_tokens) * self.output_price.clone()
    }
}

/// `input_tokens * input_price + output_tokens * output_price`.
pub fn cost_per_comparison<T: Scalar>(model: &CostModel<T>) -> T {
    model.input_cost() + model.output_cost()
}

/// Published per-comparison costs (USD) with per-token rates derived at
/// 1300 input / 300 output tokens.
pub fn published_cost_table() -> Vec<(&'static str, CostModel<Rational>)> {
    [
        ("Claude 3.5 Sonnet", "0.0039", "0.0045"),
        ("GPT-4o", "0.00325", "0.003"),
        ("Gemini 1.5 Pro", "0.00114", "0.00038"),
        ("LLaMA 3.1 (local)", "0", "0"),
    ]
    .into_iter()
    .map(|(name, input, output)| {
        let d = |s| rational_from_decimal(s).expect("table literal");
        (name, CostModel::from_per_comparison(d(input), d(output)))
    })
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    #[test]
    fn zero_prices_cost_nothing() {
        assert_eq!(cost_per_comparison(&CostModel::new(0.0, 0.0)), 0.0);
    }

    #[test]
    fn table_rows_are_exact() {
        let table = published_cost_table();
        let total = |name: &str| cost_per_comparison(&table.iter().find(|(n, _)| *n == name).unwrap().1);
        assert_eq!(total("Claude 3.5 Sonnet"), ratio(84, 10_000));
        assert_eq!(total("GPT-4o"), ratio(625, 100_000));
        assert_eq!(total("Gemini 1.5 Pro"), ratio(152, 100_000));
        assert_eq!(total("LLaMA 3.1 (local)"), ratio(0, 1));
    }

    #[test]
    fn float_version_matches() {
        let m = CostModel::new(0.00325f64 / 1300.0, 0.003 / 300.0);
        assert!((cost_per_comparison(&m) - 0.00625).abs() < 1e-15);
        let mut custom = m.clone();
        custom.output_tokens = 0;
        assert!((cost_per_comparison(&custom) - 0.00325).abs() < 1e-15);
    }
}
