#pragma once

#include "catcast/util.hpp"

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace catcast {

// Minimal ordered JSON emitter. Reports and manifests must be byte-stable
// across identical runs, with doubles at 17 significant digits; this writer
// pins both (library emitters choose shortest-round-trip float forms and
// their own key ordering).
class JsonWriter {
public:
    void begin_object() { open('{'); }
    void end_object() { close('}'); }
    void begin_array() { open('['); }
    void end_array() { close(']'); }

    void key(std::string_view k) {
        element_prefix(true);
        append_string(k);
        out_ += ": ";
        has_key_ = true;
    }

    void value(std::string_view s) {
        element_prefix(false);
        append_string(s);
    }
    void value(const char* s) { value(std::string_view(s)); }
    void value(double v) {
        element_prefix(false);
        out_ += format_g17(v);
    }
    void value(std::int64_t v) {
        element_prefix(false);
        out_ += std::to_string(v);
    }
    void value(std::uint64_t v) {
        element_prefix(false);
        out_ += std::to_string(v);
    }
    void value(int v) { value(static_cast<std::int64_t>(v)); }
    void value(unsigned v) { value(static_cast<std::uint64_t>(v)); }
    void value(bool v) {
        element_prefix(false);
        out_ += v ? "true" : "false";
    }
    void null() {
        element_prefix(false);
        out_ += "null";
    }

    template <class T>
    void field(std::string_view k, const T& v) {
        key(k);
        value(v);
    }

    const std::string& str() const { return out_; }
    std::string take() { return std::move(out_); }

private:
    struct Level {
        char kind;
        bool any = false;
    };

    void open(char c) {
        element_prefix(false);
        out_ += c;
        stack_.push_back({c});
    }

    void close(char c) {
        bool any = stack_.back().any;
        stack_.pop_back();
        if (any) {
            out_ += '\n';
            indent();
        }
        out_ += c;
    }

    void element_prefix(bool is_key) {
        if (stack_.empty())
            return;
        if (has_key_ && !is_key) {
            has_key_ = false;
            return; // value right after its key
        }
        if (stack_.back().any)
            out_ += ',';
        stack_.back().any = true;
        out_ += '\n';
        indent();
    }

    void indent() { out_.append(2 * stack_.size(), ' '); }

    void append_string(std::string_view s) {
        out_ += '"';
        for (unsigned char c : s) {
            switch (c) {
            case '"': out_ += "\\\""; break;
            case '\\': out_ += "\\\\"; break;
            case '\b': out_ += "\\b"; break;
            case '\f': out_ += "\\f"; break;
            case '\n': out_ += "\\n"; break;
            case '\r': out_ += "\\r"; break;
            case '\t': out_ += "\\t"; break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out_ += buf;
                } else {
                    out_ += static_cast<char>(c);
                }
            }
        }
        out_ += '"';
    }

    std::string out_;
    std::vector<Level> stack_;
    bool has_key_ = false;
};

} // namespace catcast
