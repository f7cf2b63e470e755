#include "catcast/categorize.hpp"

#include "catcast/error.hpp"
#include "catcast/json_writer.hpp"
#include "catcast/util.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace catcast::cat {

const char* basis_name(Basis b) {
    return b == Basis::volatility_change ? "volatility_change" : "price_direction";
}

Basis basis_from_name(const std::string& name) {
    if (name == "volatility_change")
        return Basis::volatility_change;
    if (name == "price_direction")
        return Basis::price_direction;
    fail("unknown basis '", name, "'");
}

void CategoryScheme::validate() const {
    require(window_len >= 3, "window length must be at least 3, got ", window_len);
    require(bit_count == window_len - 1 || bit_count == window_len - 2,
            "bit count ", bit_count, " must be window_len-1 or window_len-2 (window_len=",
            window_len, ")");
    require(bit_count >= 1 && bit_count < 31, "bit count out of range");
}

CategoryId categorize(std::span<const double> window, const CategoryScheme& scheme) {
    scheme.validate();
    require(window.size() == scheme.window_len, "window length ", window.size(),
            " does not match scheme window length ", scheme.window_len);
    CategoryId id = 0;
    for (std::size_t i = 0; i < scheme.bit_count; ++i) {
        const bool up = scheme.basis == Basis::volatility_change
                            ? window[i + 1] > window[i]
                            : window[i] > 0.0;
        id = (id << 1) | static_cast<CategoryId>(up);
    }
    return id;
}

CategoryId categorize_prefix(std::span<const double> values, const CategoryScheme& scheme) {
    scheme.validate();
    require(scheme.bit_count == scheme.window_len - 2,
            "categorize_prefix applies only to window_len-2 bit schemes");
    const std::size_t prefix_len = scheme.window_len - 1;
    require(values.size() >= prefix_len, "prefix of ", values.size(),
            " values too short; need the window's first ", prefix_len, " values");
    // The trailing prefix_len values are the first window_len-1 values of
    // the upcoming window, whose final value is still unobserved. A k=n-2
    // id never touches that final value, so it is computable here and
    // matches categorize() on the completed window.
    std::span<const double> p = values.subspan(values.size() - prefix_len, prefix_len);
    CategoryId id = 0;
    for (std::size_t i = 0; i < scheme.bit_count; ++i) {
        const bool up = scheme.basis == Basis::volatility_change
                            ? p[i + 1] > p[i]
                            : p[i] > 0.0;
        id = (id << 1) | static_cast<CategoryId>(up);
    }
    return id;
}

std::pair<CategoryId, CategoryId> successors(CategoryId c, const CategoryScheme& scheme) {
    scheme.validate();
    require(c < scheme.category_count(), "category ", c, " out of range");
    const CategoryId lo = (c << 1) & static_cast<CategoryId>(scheme.category_count() - 1);
    return {lo, lo + 1};
}

std::size_t CategorizedDataset::total_windows() const {
    std::size_t n = 0;
    for (const auto& b : buckets)
        n += b.size();
    return n;
}

std::size_t CategorizedDataset::nonempty_buckets() const {
    std::size_t n = 0;
    for (const auto& b : buckets)
        n += !b.empty();
    return n;
}

CategorizedDataset build_dataset(
    const std::map<std::string, std::vector<prep::Window>>& windows_per_asset,
    const CategoryScheme& scheme) {
    scheme.validate();
    CategorizedDataset ds;
    ds.scheme = scheme;
    ds.buckets.resize(scheme.category_count());
    for (const auto& [pair_id, windows] : windows_per_asset) {
        auto& seq = ds.asset_sequences[pair_id];
        seq.reserve(windows.size());
        for (const auto& w : windows) {
            require(w.values.size() == scheme.window_len, "asset ", pair_id,
                    ": window length ", w.values.size(), " does not match scheme length ",
                    scheme.window_len);
            const CategoryId id = categorize(w.values, scheme);
            ds.buckets[id].push_back(w);
            seq.push_back(id);
        }
    }
    return ds;
}

CategoryTrainingSeries training_series(const CategorizedDataset& dataset, CategoryId c) {
    require(c < dataset.buckets.size(), "category ", c, " out of range");
    const auto& bucket = dataset.buckets[c];
    require(!bucket.empty(), "category ", c, " unseen in training data (empty bucket)");
    CategoryTrainingSeries out;
    out.category = c;
    const std::size_t n = dataset.scheme.window_len;
    out.values.reserve(bucket.size() * n);
    out.positions.reserve(bucket.size() * n);
    for (const auto& w : bucket) {
        for (std::size_t i = 0; i < n; ++i) {
            out.values.push_back(w.values[i]);
            out.positions.push_back(static_cast<double>(i + 1));
        }
    }
    return out;
}

namespace {

std::string category_file_name(CategoryId c) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "cat_%03u.txt", c);
    return buf;
}

void hash_append(std::uint64_t& h, std::string_view s) { h = fnv1a64(s, h); }

} // namespace

std::uint64_t dataset_content_hash(const CategorizedDataset& dataset) {
    std::uint64_t h = fnv1a64("catcast-dataset-v1");
    std::ostringstream head;
    head << dataset.scheme.window_len << '|' << dataset.scheme.bit_count << '|'
         << basis_name(dataset.scheme.basis);
    hash_append(h, head.str());
    for (const auto& [pair_id, seq] : dataset.asset_sequences) {
        hash_append(h, pair_id);
        std::string line;
        for (CategoryId c : seq) {
            line += std::to_string(c);
            line += ' ';
        }
        hash_append(h, line);
    }
    for (std::size_t c = 0; c < dataset.buckets.size(); ++c) {
        for (const auto& w : dataset.buckets[c]) {
            std::string line;
            for (double v : w.values) {
                line += format_g17(v);
                line += ' ';
            }
            hash_append(h, line);
        }
    }
    return h;
}

void save_dataset(const CategorizedDataset& dataset, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "categories");
    fs::create_directories(dir / "sequences");

    for (std::size_t c = 0; c < dataset.buckets.size(); ++c) {
        if (dataset.buckets[c].empty())
            continue;
        std::ofstream out(dir / "categories" / category_file_name(static_cast<CategoryId>(c)));
        require(out.good(), "cannot write category file in ", dir.string());
        for (const auto& w : dataset.buckets[c]) {
            for (std::size_t i = 0; i < w.values.size(); ++i)
                out << (i ? " " : "") << format_g17(w.values[i]);
            out << '\n';
        }
    }
    for (const auto& [pair_id, seq] : dataset.asset_sequences) {
        std::ofstream out(dir / "sequences" / (pair_id + ".txt"));
        require(out.good(), "cannot write sequence file for ", pair_id);
        for (CategoryId c : seq)
            out << c << '\n';
    }

    JsonWriter w;
    w.begin_object();
    w.field("format", "catcast-dataset");
    w.field("version", 1);
    w.key("scheme");
    w.begin_object();
    w.field("window_len", dataset.scheme.window_len);
    w.field("bit_count", dataset.scheme.bit_count);
    w.field("basis", basis_name(dataset.scheme.basis));
    w.end_object();
    w.key("assets");
    w.begin_array();
    for (const auto& [pair_id, seq] : dataset.asset_sequences) {
        w.begin_object();
        w.field("pair_id", pair_id);
        w.field("window_count", seq.size());
        w.end_object();
    }
    w.end_array();
    w.key("category_window_counts");
    w.begin_object();
    for (std::size_t c = 0; c < dataset.buckets.size(); ++c) {
        if (!dataset.buckets[c].empty())
            w.field(std::to_string(c), dataset.buckets[c].size());
    }
    w.end_object();
    w.field("total_windows", dataset.total_windows());
    w.field("content_hash", hex_u64(dataset_content_hash(dataset)));
    w.end_object();

    std::ofstream out(dir / "manifest.json");
    require(out.good(), "cannot write dataset manifest in ", dir.string());
    out << w.str() << '\n';
}

CategorizedDataset load_dataset(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::ifstream min(dir / "manifest.json");
    require(min.good(), "cannot open dataset manifest in ", dir.string());
    nlohmann::json manifest = nlohmann::json::parse(min);
    require(manifest.value("format", "") == "catcast-dataset", "not a dataset directory: ",
            dir.string());
    require(manifest.value("version", 0) == 1, "unsupported dataset version");

    CategorizedDataset ds;
    ds.scheme.window_len = manifest["scheme"]["window_len"].get<std::size_t>();
    ds.scheme.bit_count = manifest["scheme"]["bit_count"].get<std::size_t>();
    ds.scheme.basis = basis_from_name(manifest["scheme"]["basis"].get<std::string>());
    ds.scheme.validate();
    ds.buckets.resize(ds.scheme.category_count());

    for (const auto& [key, count] : manifest["category_window_counts"].items()) {
        const CategoryId c = static_cast<CategoryId>(std::stoul(key));
        require(c < ds.buckets.size(), "manifest category ", key, " out of range");
        std::ifstream in(dir / "categories" / category_file_name(c));
        require(in.good(), "missing category file for category ", key);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty())
                continue;
            prep::Window w;
            std::istringstream ls(line);
            double v;
            while (ls >> v)
                w.values.push_back(v);
            require(w.values.size() == ds.scheme.window_len, "category ", key,
                    ": bad window length in file");
            require(categorize(w.values, ds.scheme) == c, "category ", key,
                    ": stored window re-encodes to a different id");
            ds.buckets[c].push_back(std::move(w));
        }
        require(ds.buckets[c].size() == count.get<std::size_t>(), "category ", key,
                ": window count does not match manifest");
    }

    for (const auto& asset : manifest["assets"]) {
        const std::string pair_id = asset["pair_id"].get<std::string>();
        std::ifstream in(dir / "sequences" / (pair_id + ".txt"));
        require(in.good(), "missing sequence file for ", pair_id);
        auto& seq = ds.asset_sequences[pair_id];
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty())
                continue;
            seq.push_back(static_cast<CategoryId>(std::stoul(line)));
        }
        require(seq.size() == asset["window_count"].get<std::size_t>(), "sequence for ",
                pair_id, " does not match manifest window count");
    }

    const std::string want = manifest["content_hash"].get<std::string>();
    require(hex_u64(dataset_content_hash(ds)) == want,
            "dataset content hash mismatch in ", dir.string());
    return ds;
}

} // namespace catcast::cat
