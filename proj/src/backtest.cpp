#include "catcast/backtest.hpp"

#include "catcast/error.hpp"
#include "catcast/util.hpp"

#include <ostream>

namespace catcast::bt {

void BacktestConfig::validate() const {
    require(initial_quote > 0, "initial_quote must be positive");
    require(fee_rate >= 0 && fee_rate < 1, "fee_rate must lie in [0,1)");
}

TradeLedger run_backtest(std::span<const Direction> directions,
                         std::span<const double> closes, const BacktestConfig& config) {
    config.validate();
    require(closes.size() == directions.size() + 1,
            "closes must carry one price per direction plus the final close (got ",
            closes.size(), " closes for ", directions.size(), " directions)");
    for (double p : closes)
        require(p > 0, "non-positive close price");

    TradeLedger ledger;
    ledger.initial_quote = config.initial_quote;
    double quote = config.initial_quote;
    double base = 0.0;

    for (std::size_t t = 0; t < directions.size(); ++t) {
        const double price = closes[t];
        if (directions[t] == Direction::up && base == 0.0) {
            const double fee = quote * config.fee_rate;
            const double qty = (quote - fee) / price;
            base = qty;
            quote = 0.0;
            ledger.trades.push_back({t, Side::buy, price, qty, fee, qty * price});
        } else if (directions[t] == Direction::down && base > 0.0) {
            const double gross = base * price;
            const double fee = gross * config.fee_rate;
            quote = gross - fee;
            ledger.trades.push_back({t, Side::sell, price, base, fee, quote});
            base = 0.0;
        }
    }

    if (base > 0.0 && config.liquidate_at_end) {
        const std::size_t t = directions.size();
        const double price = closes[t];
        const double gross = base * price;
        const double fee = gross * config.fee_rate;
        quote = gross - fee;
        ledger.trades.push_back({t, Side::sell, price, base, fee, quote});
        base = 0.0;
        ledger.liquidated_at_end = true;
    }

    // An open, unliquidated position is marked at the last close.
    ledger.final_value = quote + base * closes.back();
    return ledger;
}

double buy_and_hold(std::span<const double> closes, const BacktestConfig& config) {
    config.validate();
    require(closes.size() >= 2, "buy-and-hold needs at least two closes");
    for (double p : closes)
        require(p > 0, "non-positive close price");
    const double r = 1.0 - config.fee_rate;
    return config.initial_quote * (closes.back() / closes.front()) * r * r;
}

double replay_ledger(const TradeLedger& ledger, std::span<const double> closes) {
    // Quantities are recomputed from the running cash chain, so replay
    // equality actually checks the recorded fees and prices.
    double quote = ledger.initial_quote;
    double base = 0.0;
    for (const Trade& tr : ledger.trades) {
        if (tr.side == Side::buy) {
            base = (quote - tr.fee) / tr.price;
            quote = 0.0;
        } else {
            quote = base * tr.price - tr.fee;
            base = 0.0;
        }
    }
    return quote + (closes.empty() ? 0.0 : base * closes.back());
}

DirectionMetrics direction_metrics(std::span<const Direction> predicted,
                                   std::span<const double> realized_volatility) {
    require(predicted.size() == realized_volatility.size(),
            "prediction/realization length mismatch (", predicted.size(), " vs ",
            realized_volatility.size(), ")");
    DirectionMetrics m;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const bool up_pred = predicted[i] == Direction::up;
        const bool up_real = realized_volatility[i] > 0.0; // V = 0 counts as bearish
        if (up_pred && up_real)
            ++m.tp;
        else if (up_pred && !up_real)
            ++m.fp;
        else if (!up_pred && !up_real)
            ++m.tn;
        else
            ++m.fn;
    }
    const std::int64_t total = m.tp + m.fp + m.tn + m.fn;
    m.accuracy = total > 0 ? static_cast<double>(m.tp + m.tn) / static_cast<double>(total) : 0.0;
    if (m.tp + m.fp > 0)
        m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
    return m;
}

void write_ledger_csv(const TradeLedger& ledger, std::ostream& out) {
    out << "time_index,side,price,quantity,fee,equity\n";
    for (const Trade& t : ledger.trades) {
        out << t.time_index << ',' << (t.side == Side::buy ? "buy" : "sell") << ','
            << format_g17(t.price) << ',' << format_g17(t.quantity) << ','
            << format_g17(t.fee) << ',' << format_g17(t.equity) << '\n';
    }
}

} // namespace catcast::bt
