#include "catcast/selector.hpp"

#include "catcast/error.hpp"

#include <fstream>
#include <sstream>

namespace catcast::sel {

double TransitionModel::prob_bit(cat::CategoryId c, int bit) const {
    require(c < counts.size(), "category ", c, " out of range");
    require(bit == 0 || bit == 1, "bit must be 0 or 1");
    const double total = static_cast<double>(counts[c][0] + counts[c][1]) + 2.0 * alpha;
    if (total == 0.0)
        return 0.5; // alpha = 0 and no observations
    // One division plus the complement keeps P(0|c) + P(1|c) == 1 exact.
    const double p1 = (static_cast<double>(counts[c][1]) + alpha) / total;
    return bit == 1 ? p1 : 1.0 - p1;
}

std::pair<cat::CategoryId, double> TransitionModel::predict_next(cat::CategoryId c) const {
    const auto [lo, hi] = cat::successors(c, scheme);
    const double p1 = prob_bit(c, 1);
    if (p1 > 0.5)
        return {hi, p1};
    return {lo, 1.0 - p1};
}

void TransitionModel::update_online(cat::CategoryId from, cat::CategoryId to) {
    const auto [lo, hi] = cat::successors(from, scheme);
    require(to == lo || to == hi, "illegal transition ", from, " -> ", to,
            " (successors are ", lo, " and ", hi, ")");
    ++counts[from][to == hi ? 1 : 0];
}

TransitionModel empty_model(const cat::CategoryScheme& scheme, double alpha) {
    scheme.validate();
    require(alpha >= 0, "smoothing alpha must be non-negative");
    TransitionModel m;
    m.scheme = scheme;
    m.alpha = alpha;
    m.counts.assign(scheme.category_count(), {0, 0});
    return m;
}

TransitionModel fit(std::span<const cat::CategoryId> sequence,
                    const cat::CategoryScheme& scheme, double alpha) {
    TransitionModel m = empty_model(scheme, alpha);
    for (std::size_t i = 0; i + 1 < sequence.size(); ++i)
        m.update_online(sequence[i], sequence[i + 1]);
    return m;
}

cat::CategoryId oracle_select(cat::CategoryId truth) { return truth; }

void save_selector(const TransitionModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    require(out.good(), "cannot write selector to ", path.string());
    out << "catcast-selector 1\n";
    out << "window_len " << model.scheme.window_len << '\n';
    out << "bit_count " << model.scheme.bit_count << '\n';
    out << "basis " << cat::basis_name(model.scheme.basis) << '\n';
    out << "alpha " << model.alpha << '\n';
    out << "counts " << model.counts.size() << '\n';
    for (std::size_t c = 0; c < model.counts.size(); ++c)
        out << c << ' ' << model.counts[c][0] << ' ' << model.counts[c][1] << '\n';
    out.flush();
    require(out.good(), "write failed for ", path.string());
}

TransitionModel load_selector(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open selector file ", path.string());
    std::string magic;
    int version = 0;
    in >> magic >> version;
    require(magic == "catcast-selector", "not a selector file: ", path.string());
    require(version == 1, "unsupported selector version ", version);

    TransitionModel m;
    std::string key;
    std::size_t n_counts = 0;
    std::string basis;
    in >> key >> m.scheme.window_len;
    require(key == "window_len", "malformed selector file");
    in >> key >> m.scheme.bit_count;
    require(key == "bit_count", "malformed selector file");
    in >> key >> basis;
    require(key == "basis", "malformed selector file");
    m.scheme.basis = cat::basis_from_name(basis);
    in >> key >> m.alpha;
    require(key == "alpha", "malformed selector file");
    in >> key >> n_counts;
    require(key == "counts", "malformed selector file");
    m.scheme.validate();
    require(n_counts == m.scheme.category_count(), "selector count table size mismatch");
    m.counts.assign(n_counts, {0, 0});
    for (std::size_t i = 0; i < n_counts; ++i) {
        std::size_t c = 0;
        std::int64_t c0 = -1, c1 = -1;
        in >> c >> c0 >> c1;
        require(in.good() && c == i && c0 >= 0 && c1 >= 0, "malformed selector count row ", i);
        m.counts[c] = {c0, c1};
    }
    return m;
}

} // namespace catcast::sel
