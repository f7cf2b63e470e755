#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace catcast::bt {

enum class Direction : int { down = 0, up = 1 };

struct BacktestConfig {
    double initial_quote = 100.0; // quote units (USDT in the default setup)
    double fee_rate = 0.0;        // fraction per side
    bool liquidate_at_end = true;

    void validate() const;
};

enum class Side { buy, sell };

struct Trade {
    std::size_t time_index = 0;
    Side side = Side::buy;
    double price = 0.0;
    double quantity = 0.0; // base units
    double fee = 0.0;      // quote units
    double equity = 0.0;   // quote value right after the trade, at trade price
};

struct TradeLedger {
    std::vector<Trade> trades;
    double initial_quote = 0.0;
    double final_value = 0.0;
    bool liquidated_at_end = false;
};

// All-in strategy replay. directions[t] is the call for step t+1's close and
// executes at closes[t]; closes therefore carries one price more than
// directions (the final close settles the last call and any end-of-run
// liquidation). Predicted up while flat buys with the whole quote balance;
// predicted down while long sells the whole base position; anything else
// holds.
TradeLedger run_backtest(std::span<const Direction> directions,
                         std::span<const double> closes, const BacktestConfig& config);

// initial * (close_end/close_start) * (1-fee)^2
double buy_and_hold(std::span<const double> closes, const BacktestConfig& config);

// Recomputes the final value from initial_quote and the trade records; the
// ledger invariant is replay_ledger == final_value (1e-9 relative).
double replay_ledger(const TradeLedger& ledger, std::span<const double> closes);

// Bullish is the positive class; realized V <= 0 counts as bearish.
struct DirectionMetrics {
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    double accuracy = 0.0;
    std::optional<double> precision; // absent when tp+fp == 0
};

DirectionMetrics direction_metrics(std::span<const Direction> predicted,
                                   std::span<const double> realized_volatility);

// CSV columns: time_index, side, price, quantity, fee, equity.
void write_ledger_csv(const TradeLedger& ledger, std::ostream& out);

} // namespace catcast::bt
