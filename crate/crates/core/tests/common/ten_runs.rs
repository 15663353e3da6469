//! Ten solved runs whose per-run costs match the published cost table.

use proofloop::agents::TokenUsage;
use proofloop::ledger::CostModel;

/// Published per-problem costs, in cents.
pub const PER_RUN_CENTS: [u64; 10] = [22050, 18427, 12728, 1005, 7821, 11833, 1353, 6216, 27366, 9547];
pub const TOTAL: &str = "$1,183.45";

pub fn model() -> CostModel {
    CostModel::per_million(5.0, 25.0, 0.5, 6.25)
}

/// A usage whose exact cost is `cents` minus a tenth of a cent, so each
/// run still rounds to the published figure. Fixed prompt, completion and
/// cache-write volumes; cache reads make up the rest.
pub fn usage_for(cents: u64) -> TokenUsage {
    // Exact cost unit is 1e-10 USD; rates below are per token in that unit.
    let (prompt, completion, cache_read, cache_write) = (50_000u128, 250_000u128, 5_000u128, 62_500u128);
    let target = cents as u128 * 100_000_000 - 10_000_000;
    let (p, c, w) = (400_000u128, 60_000u128, 200_000u128);
    let fixed = p * prompt + c * completion + w * cache_write;
    let rest = target - fixed;
    assert_eq!(rest % cache_read, 0);
    TokenUsage {
        prompt_tokens: p as u64,
        completion_tokens: c as u64,
        cache_read_tokens: (rest / cache_read) as u64,
        cache_write_tokens: w as u64,
    }
}

pub fn usages() -> Vec<TokenUsage> {
    PER_RUN_CENTS.iter().map(|&c| usage_for(c)).collect()
}
