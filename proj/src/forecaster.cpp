#include "catcast/forecaster.hpp"

#include "catcast/error.hpp"
#include "catcast/json_writer.hpp"
#include "catcast/kernels.hpp"
#include "catcast/util.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace catcast::fc {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

// Seed streams so init and epoch shuffling draw from unrelated sequences.
constexpr std::uint64_t kInitStream = 0x1afe77e5u;
constexpr std::uint64_t kShuffleStream = 0x5caff1e5u;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

const char* loss_name(Loss l) { return l == Loss::mse ? "mse" : "quantile"; }

Loss loss_from_name(const std::string& name) {
    if (name == "mse")
        return Loss::mse;
    if (name == "quantile")
        return Loss::quantile;
    fail("unknown loss '", name, "'");
}

std::size_t ForecasterConfig::median_index() const {
    if (loss != Loss::quantile)
        return 0;
    std::size_t best = 0;
    for (std::size_t i = 1; i < quantiles.size(); ++i)
        if (std::abs(quantiles[i] - 0.5) < std::abs(quantiles[best] - 0.5))
            best = i;
    return best;
}

void ForecasterConfig::validate() const {
    require(input_len >= 1, "input_len must be positive");
    require(output_len == 1, "only single-step output is supported");
    require(hidden_size >= 1, "hidden_size must be positive");
    require(recurrent_layers >= 1, "recurrent_layers must be positive");
    require(attention_heads >= 1, "attention_heads must be positive");
    require(head_dim() >= 1, "attention_heads (", attention_heads,
            ") exceeds hidden_size (", hidden_size, ")");
    require(batch_size >= 1, "batch_size must be positive");
    require(learning_rate >= 0, "learning_rate must be non-negative");
    if (loss == Loss::quantile) {
        require(!quantiles.empty(), "quantile loss needs at least one quantile");
        for (double q : quantiles)
            require(q > 0 && q < 1, "quantiles must lie in (0,1)");
    }
}

namespace {

std::vector<TensorInfo> build_layout(const ForecasterConfig& cfg, std::size_t& total) {
    const std::size_t H = cfg.hidden_size;
    const std::size_t P = cfg.attention_heads * cfg.head_dim();
    std::vector<TensorInfo> layout;
    total = 0;
    auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
        layout.push_back({std::move(name), rows, cols, total});
        total += rows * cols;
    };
    add("emb.w", H, 2);
    add("emb.b", H, 1);
    for (std::size_t l = 0; l < cfg.recurrent_layers; ++l) {
        const std::string p = "lstm" + std::to_string(l);
        add(p + ".wx", 4 * H, H);
        add(p + ".wh", 4 * H, H);
        add(p + ".b", 4 * H, 1);
    }
    add("glu1.w1", H, H);
    add("glu1.b1", H, 1);
    add("glu1.w2", H, H);
    add("glu1.b2", H, 1);
    add("ln1.gamma", H, 1);
    add("ln1.beta", H, 1);
    add("attn.wq", P, H);
    add("attn.bq", P, 1);
    add("attn.wk", P, H);
    add("attn.bk", P, 1);
    add("attn.wv", P, H);
    add("attn.bv", P, 1);
    add("attn.wo", H, P);
    add("attn.bo", H, 1);
    add("glu2.w1", H, H);
    add("glu2.b1", H, 1);
    add("glu2.w2", H, H);
    add("glu2.b2", H, 1);
    add("ln2.gamma", H, 1);
    add("ln2.beta", H, 1);
    add("head.w", cfg.output_count(), H);
    add("head.b", cfg.output_count(), 1);
    return layout;
}

// Raw tensor views over one flat array; resolved once per forward/train call
// so the hot loops never do name lookups.
struct NetView {
    std::size_t T, H, L, A, dh, P, O;
    double *emb_w, *emb_b;
    struct LstmView {
        double *wx, *wh, *b;
    };
    std::vector<LstmView> lstm;
    double *glu1_w1, *glu1_b1, *glu1_w2, *glu1_b2, *ln1_g, *ln1_b;
    double *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
    double *glu2_w1, *glu2_b1, *glu2_w2, *glu2_b2, *ln2_g, *ln2_b;
    double *head_w, *head_b;
};

NetView wire(const ForecasterConfig& cfg, const std::vector<TensorInfo>& layout, double* base) {
    NetView n;
    n.T = cfg.input_len;
    n.H = cfg.hidden_size;
    n.L = cfg.recurrent_layers;
    n.A = cfg.attention_heads;
    n.dh = cfg.head_dim();
    n.P = n.A * n.dh;
    n.O = cfg.output_count();
    auto at = [&](std::string_view name) -> double* {
        for (const auto& t : layout)
            if (t.name == name)
                return base + t.offset;
        fail("tensor '", name, "' missing from layout");
    };
    n.emb_w = at("emb.w");
    n.emb_b = at("emb.b");
    n.lstm.resize(n.L);
    for (std::size_t l = 0; l < n.L; ++l) {
        const std::string p = "lstm" + std::to_string(l);
        n.lstm[l] = {at(p + ".wx"), at(p + ".wh"), at(p + ".b")};
    }
    n.glu1_w1 = at("glu1.w1");
    n.glu1_b1 = at("glu1.b1");
    n.glu1_w2 = at("glu1.w2");
    n.glu1_b2 = at("glu1.b2");
    n.ln1_g = at("ln1.gamma");
    n.ln1_b = at("ln1.beta");
    n.wq = at("attn.wq");
    n.bq = at("attn.bq");
    n.wk = at("attn.wk");
    n.bk = at("attn.bk");
    n.wv = at("attn.wv");
    n.bv = at("attn.bv");
    n.wo = at("attn.wo");
    n.bo = at("attn.bo");
    n.glu2_w1 = at("glu2.w1");
    n.glu2_b1 = at("glu2.b1");
    n.glu2_w2 = at("glu2.w2");
    n.glu2_b2 = at("glu2.b2");
    n.ln2_g = at("ln2.gamma");
    n.ln2_b = at("ln2.beta");
    n.head_w = at("head.w");
    n.head_b = at("head.b");
    return n;
}

NetView wire_const(const ForecasterParams& p) {
    return wire(p.config, p.layout, const_cast<double*>(p.data.data()));
}

struct LayerCache {
    std::vector<double> i, f, g, o, c, tanh_c, h; // T*H each
};

struct Workspace {
    std::vector<double> emb;                    // T*H
    std::vector<LayerCache> layers;             // L
    std::vector<double> glu1_s, glu1_u2;        // T*H
    std::vector<double> ln1_xhat, ln1_out;      // T*H
    std::vector<double> ln1_rstd;               // T
    std::vector<double> q, ctx;                 // P
    std::vector<double> k, v;                   // T*P
    std::vector<double> attw;                   // A*T
    std::vector<double> attn_out;               // H
    std::vector<double> glu2_s, glu2_u2;        // H
    std::vector<double> ln2_xhat, ln2_out;      // H
    double ln2_rstd = 0.0;
    std::vector<double> outputs;                // O
    std::vector<double> z, res, scratch;        // 4H, H, H

    // backward buffers
    std::vector<double> dout;                   // O
    std::vector<double> d_ln2out, dres2, d_attn_out, du1, du2; // H
    std::vector<double> d_ctx, dq;              // P
    std::vector<double> dk, dv;                 // T*P
    std::vector<double> d_attw, ds;             // T
    std::vector<double> d_ln1out, d_emb, d_seq_out, d_seq_in; // T*H
    std::vector<double> dh, dc, dh_rec, dc_rec; // H
    std::vector<double> dz;                     // 4H

    explicit Workspace(const ForecasterConfig& cfg) {
        const std::size_t T = cfg.input_len;
        const std::size_t H = cfg.hidden_size;
        const std::size_t P = cfg.attention_heads * cfg.head_dim();
        const std::size_t O = cfg.output_count();
        emb.resize(T * H);
        layers.resize(cfg.recurrent_layers);
        for (auto& lc : layers) {
            lc.i.resize(T * H);
            lc.f.resize(T * H);
            lc.g.resize(T * H);
            lc.o.resize(T * H);
            lc.c.resize(T * H);
            lc.tanh_c.resize(T * H);
            lc.h.resize(T * H);
        }
        glu1_s.resize(T * H);
        glu1_u2.resize(T * H);
        ln1_xhat.resize(T * H);
        ln1_out.resize(T * H);
        ln1_rstd.resize(T);
        q.resize(P);
        ctx.resize(P);
        k.resize(T * P);
        v.resize(T * P);
        attw.resize(cfg.attention_heads * T);
        attn_out.resize(H);
        glu2_s.resize(H);
        glu2_u2.resize(H);
        ln2_xhat.resize(H);
        ln2_out.resize(H);
        outputs.resize(O);
        z.resize(4 * H);
        res.resize(H);
        scratch.resize(H);
        dout.resize(O);
        d_ln2out.resize(H);
        dres2.resize(H);
        d_attn_out.resize(H);
        du1.resize(H);
        du2.resize(H);
        d_ctx.resize(P);
        dq.resize(P);
        dk.resize(T * P);
        dv.resize(T * P);
        d_attw.resize(T);
        ds.resize(T);
        d_ln1out.resize(T * H);
        d_emb.resize(T * H);
        d_seq_out.resize(T * H);
        d_seq_in.resize(T * H);
        dh.resize(H);
        dc.resize(H);
        dh_rec.resize(H);
        dc_rec.resize(H);
        dz.resize(4 * H);
    }
};

inline void zero(std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); }
inline void zero(double* p, std::size_t n) { std::fill(p, p + n, 0.0); }

void layer_norm_fwd(const double* x, const double* gamma, const double* beta, std::size_t h,
                    double* xhat, double* out, double& rstd) {
    double mu = 0.0;
    for (std::size_t j = 0; j < h; ++j)
        mu += x[j];
    mu /= static_cast<double>(h);
    double var = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
        const double d = x[j] - mu;
        var += d * d;
    }
    var /= static_cast<double>(h);
    rstd = 1.0 / std::sqrt(var + kLnEps);
    for (std::size_t j = 0; j < h; ++j) {
        xhat[j] = (x[j] - mu) * rstd;
        out[j] = gamma[j] * xhat[j] + beta[j];
    }
}

// dx = rstd * (dxhat - mean(dxhat) - xhat * mean(dxhat .* xhat))
void layer_norm_bwd(const double* dy, const double* xhat, double rstd, const double* gamma,
                    double* dgamma, double* dbeta, double* dx, std::size_t h, double* tmp) {
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
        const double dxh = dy[j] * gamma[j];
        tmp[j] = dxh;
        m1 += dxh;
        m2 += dxh * xhat[j];
        dgamma[j] += dy[j] * xhat[j];
        dbeta[j] += dy[j];
    }
    m1 /= static_cast<double>(h);
    m2 /= static_cast<double>(h);
    for (std::size_t j = 0; j < h; ++j)
        dx[j] = rstd * (tmp[j] - m1 - xhat[j] * m2);
}

void forward_cache(const NetView& n, std::span<const double> inputs,
                   std::span<const double> positions, Workspace& w) {
    namespace kn = kernels;
    const std::size_t T = n.T, H = n.H, P = n.P;

    for (std::size_t t = 0; t < T; ++t) {
        const double in2[2] = {inputs[t], positions[t]};
        kn::affine(n.emb_w, in2, n.emb_b, &w.emb[t * H], H, 2);
    }

    const double* xseq = w.emb.data();
    for (std::size_t l = 0; l < n.L; ++l) {
        LayerCache& lc = w.layers[l];
        for (std::size_t t = 0; t < T; ++t) {
            kn::affine(n.lstm[l].wx, xseq + t * H, n.lstm[l].b, w.z.data(), 4 * H, H);
            if (t > 0)
                kn::matvec_acc(n.lstm[l].wh, &lc.h[(t - 1) * H], w.z.data(), 4 * H, H);
            for (std::size_t j = 0; j < H; ++j) {
                const double iv = sigmoid(w.z[j]);
                const double fv = sigmoid(w.z[H + j]);
                const double gv = std::tanh(w.z[2 * H + j]);
                const double ov = sigmoid(w.z[3 * H + j]);
                const double c_prev = t > 0 ? lc.c[(t - 1) * H + j] : 0.0;
                const double cv = fv * c_prev + iv * gv;
                const double tc = std::tanh(cv);
                lc.i[t * H + j] = iv;
                lc.f[t * H + j] = fv;
                lc.g[t * H + j] = gv;
                lc.o[t * H + j] = ov;
                lc.c[t * H + j] = cv;
                lc.tanh_c[t * H + j] = tc;
                lc.h[t * H + j] = ov * tc;
            }
        }
        xseq = lc.h.data();
    }

    const double* top = w.layers[n.L - 1].h.data();
    for (std::size_t t = 0; t < T; ++t) {
        kn::affine(n.glu1_w1, top + t * H, n.glu1_b1, w.scratch.data(), H, H);
        for (std::size_t j = 0; j < H; ++j)
            w.glu1_s[t * H + j] = sigmoid(w.scratch[j]);
        kn::affine(n.glu1_w2, top + t * H, n.glu1_b2, &w.glu1_u2[t * H], H, H);
        for (std::size_t j = 0; j < H; ++j)
            w.res[j] = w.emb[t * H + j] + w.glu1_s[t * H + j] * w.glu1_u2[t * H + j];
        layer_norm_fwd(w.res.data(), n.ln1_g, n.ln1_b, H, &w.ln1_xhat[t * H],
                       &w.ln1_out[t * H], w.ln1_rstd[t]);
    }

    // Self-attention with the final step as the query; a causal mask lets
    // the last position see every step, so the score row covers 0..T-1.
    kn::affine(n.wq, &w.ln1_out[(T - 1) * H], n.bq, w.q.data(), P, H);
    for (std::size_t t = 0; t < T; ++t) {
        kn::affine(n.wk, &w.ln1_out[t * H], n.bk, &w.k[t * P], P, H);
        kn::affine(n.wv, &w.ln1_out[t * H], n.bv, &w.v[t * P], P, H);
    }
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(n.dh));
    for (std::size_t a = 0; a < n.A; ++a) {
        double* aw = &w.attw[a * T];
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < T; ++t) {
            aw[t] = kn::dot(&w.q[a * n.dh], &w.k[t * P + a * n.dh], n.dh) * inv_sqrt;
            mx = std::max(mx, aw[t]);
        }
        double sum = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            aw[t] = std::exp(aw[t] - mx);
            sum += aw[t];
        }
        double* cx = &w.ctx[a * n.dh];
        zero(cx, n.dh);
        for (std::size_t t = 0; t < T; ++t) {
            aw[t] /= sum;
            kn::axpy(aw[t], &w.v[t * P + a * n.dh], cx, n.dh);
        }
    }
    kn::affine(n.wo, w.ctx.data(), n.bo, w.attn_out.data(), H, P);

    kn::affine(n.glu2_w1, w.attn_out.data(), n.glu2_b1, w.scratch.data(), H, H);
    for (std::size_t j = 0; j < H; ++j)
        w.glu2_s[j] = sigmoid(w.scratch[j]);
    kn::affine(n.glu2_w2, w.attn_out.data(), n.glu2_b2, w.glu2_u2.data(), H, H);
    for (std::size_t j = 0; j < H; ++j)
        w.res[j] = w.ln1_out[(T - 1) * H + j] + w.glu2_s[j] * w.glu2_u2[j];
    layer_norm_fwd(w.res.data(), n.ln2_g, n.ln2_b, H, w.ln2_xhat.data(), w.ln2_out.data(),
                   w.ln2_rstd);

    kn::affine(n.head_w, w.ln2_out.data(), n.head_b, w.outputs.data(), n.O, H);
}

double loss_and_dout(const ForecasterConfig& cfg, const std::vector<double>& outputs,
                     double target, std::vector<double>& dout) {
    if (cfg.loss == Loss::mse) {
        const double e = outputs[0] - target;
        dout[0] = 2.0 * e;
        return e * e;
    }
    const double nq = static_cast<double>(cfg.quantiles.size());
    double loss = 0.0;
    for (std::size_t qi = 0; qi < cfg.quantiles.size(); ++qi) {
        const double q = cfg.quantiles[qi];
        const double e = target - outputs[qi];
        loss += (e > 0 ? q * e : (q - 1.0) * e) / nq;
        dout[qi] = (e > 0 ? -q : 1.0 - q) / nq;
    }
    return loss;
}

// Accumulates dL/dtheta for one sample into grad (flat, same layout as the
// parameters). Mirrors forward_cache stage by stage in reverse.
void backward(const NetView& n, const NetView& g, std::span<const double> inputs,
              std::span<const double> positions, Workspace& w) {
    namespace kn = kernels;
    const std::size_t T = n.T, H = n.H, P = n.P;

    // head
    kn::outer_acc(g.head_w, w.dout.data(), w.ln2_out.data(), n.O, H);
    kn::axpy(1.0, w.dout.data(), g.head_b, n.O);
    zero(w.d_ln2out);
    kn::matvec_t_acc(n.head_w, w.dout.data(), w.d_ln2out.data(), n.O, H);

    // ln2 -> res2
    layer_norm_bwd(w.d_ln2out.data(), w.ln2_xhat.data(), w.ln2_rstd, n.ln2_g, g.ln2_g,
                   g.ln2_b, w.dres2.data(), H, w.scratch.data());

    zero(w.d_ln1out);
    kn::axpy(1.0, w.dres2.data(), &w.d_ln1out[(T - 1) * H], H);

    // glu2 (dglu2 = dres2)
    for (std::size_t j = 0; j < H; ++j) {
        const double s = w.glu2_s[j];
        w.du2[j] = w.dres2[j] * s;
        w.du1[j] = w.dres2[j] * w.glu2_u2[j] * s * (1.0 - s);
    }
    kn::outer_acc(g.glu2_w1, w.du1.data(), w.attn_out.data(), H, H);
    kn::axpy(1.0, w.du1.data(), g.glu2_b1, H);
    kn::outer_acc(g.glu2_w2, w.du2.data(), w.attn_out.data(), H, H);
    kn::axpy(1.0, w.du2.data(), g.glu2_b2, H);
    zero(w.d_attn_out);
    kn::matvec_t_acc(n.glu2_w1, w.du1.data(), w.d_attn_out.data(), H, H);
    kn::matvec_t_acc(n.glu2_w2, w.du2.data(), w.d_attn_out.data(), H, H);

    // output projection
    kn::outer_acc(g.wo, w.d_attn_out.data(), w.ctx.data(), H, P);
    kn::axpy(1.0, w.d_attn_out.data(), g.bo, H);
    zero(w.d_ctx);
    kn::matvec_t_acc(n.wo, w.d_attn_out.data(), w.d_ctx.data(), H, P);

    // attention core
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(n.dh));
    zero(w.dq);
    zero(w.dk);
    zero(w.dv);
    for (std::size_t a = 0; a < n.A; ++a) {
        const double* cxg = &w.d_ctx[a * n.dh];
        const double* aw = &w.attw[a * T];
        double sdot = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            w.d_attw[t] = kn::dot(cxg, &w.v[t * P + a * n.dh], n.dh);
            kn::axpy(aw[t], cxg, &w.dv[t * P + a * n.dh], n.dh);
            sdot += aw[t] * w.d_attw[t];
        }
        for (std::size_t t = 0; t < T; ++t) {
            w.ds[t] = aw[t] * (w.d_attw[t] - sdot);
            kn::axpy(w.ds[t] * inv_sqrt, &w.k[t * P + a * n.dh], &w.dq[a * n.dh], n.dh);
            kn::axpy(w.ds[t] * inv_sqrt, &w.q[a * n.dh], &w.dk[t * P + a * n.dh], n.dh);
        }
    }

    // q/k/v projections
    kn::outer_acc(g.wq, w.dq.data(), &w.ln1_out[(T - 1) * H], P, H);
    kn::axpy(1.0, w.dq.data(), g.bq, P);
    kn::matvec_t_acc(n.wq, w.dq.data(), &w.d_ln1out[(T - 1) * H], P, H);
    for (std::size_t t = 0; t < T; ++t) {
        kn::outer_acc(g.wk, &w.dk[t * P], &w.ln1_out[t * H], P, H);
        kn::axpy(1.0, &w.dk[t * P], g.bk, P);
        kn::matvec_t_acc(n.wk, &w.dk[t * P], &w.d_ln1out[t * H], P, H);
        kn::outer_acc(g.wv, &w.dv[t * P], &w.ln1_out[t * H], P, H);
        kn::axpy(1.0, &w.dv[t * P], g.bv, P);
        kn::matvec_t_acc(n.wv, &w.dv[t * P], &w.d_ln1out[t * H], P, H);
    }

    // ln1 + glu1 per step; residual splits into embedding and gated paths
    const double* top = w.layers[n.L - 1].h.data();
    zero(w.d_emb);
    zero(w.d_seq_out);
    for (std::size_t t = 0; t < T; ++t) {
        layer_norm_bwd(&w.d_ln1out[t * H], &w.ln1_xhat[t * H], w.ln1_rstd[t], n.ln1_g,
                       g.ln1_g, g.ln1_b, w.res.data(), H, w.scratch.data());
        kn::axpy(1.0, w.res.data(), &w.d_emb[t * H], H);
        for (std::size_t j = 0; j < H; ++j) {
            const double s = w.glu1_s[t * H + j];
            w.du2[j] = w.res[j] * s;
            w.du1[j] = w.res[j] * w.glu1_u2[t * H + j] * s * (1.0 - s);
        }
        kn::outer_acc(g.glu1_w1, w.du1.data(), top + t * H, H, H);
        kn::axpy(1.0, w.du1.data(), g.glu1_b1, H);
        kn::outer_acc(g.glu1_w2, w.du2.data(), top + t * H, H, H);
        kn::axpy(1.0, w.du2.data(), g.glu1_b2, H);
        kn::matvec_t_acc(n.glu1_w1, w.du1.data(), &w.d_seq_out[t * H], H, H);
        kn::matvec_t_acc(n.glu1_w2, w.du2.data(), &w.d_seq_out[t * H], H, H);
    }

    // lstm stack, top down, backward through time
    for (std::size_t li = n.L; li-- > 0;) {
        const LayerCache& lc = w.layers[li];
        const double* xin = li == 0 ? w.emb.data() : w.layers[li - 1].h.data();
        zero(w.d_seq_in);
        zero(w.dh_rec);
        zero(w.dc_rec);
        for (std::size_t t = T; t-- > 0;) {
            for (std::size_t j = 0; j < H; ++j)
                w.dh[j] = w.d_seq_out[t * H + j] + w.dh_rec[j];
            for (std::size_t j = 0; j < H; ++j) {
                const double tc = lc.tanh_c[t * H + j];
                w.dc[j] = w.dc_rec[j] + w.dh[j] * lc.o[t * H + j] * (1.0 - tc * tc);
            }
            for (std::size_t j = 0; j < H; ++j) {
                const double iv = lc.i[t * H + j];
                const double fv = lc.f[t * H + j];
                const double gv = lc.g[t * H + j];
                const double ov = lc.o[t * H + j];
                const double c_prev = t > 0 ? lc.c[(t - 1) * H + j] : 0.0;
                w.dz[j] = w.dc[j] * gv * iv * (1.0 - iv);
                w.dz[H + j] = w.dc[j] * c_prev * fv * (1.0 - fv);
                w.dz[2 * H + j] = w.dc[j] * iv * (1.0 - gv * gv);
                w.dz[3 * H + j] = w.dh[j] * lc.tanh_c[t * H + j] * ov * (1.0 - ov);
            }
            kn::outer_acc(g.lstm[li].wx, w.dz.data(), xin + t * H, 4 * H, H);
            if (t > 0)
                kn::outer_acc(g.lstm[li].wh, w.dz.data(), &lc.h[(t - 1) * H], 4 * H, H);
            kn::axpy(1.0, w.dz.data(), g.lstm[li].b, 4 * H);
            kn::matvec_t_acc(n.lstm[li].wx, w.dz.data(), &w.d_seq_in[t * H], 4 * H, H);
            zero(w.dh_rec);
            kn::matvec_t_acc(n.lstm[li].wh, w.dz.data(), w.dh_rec.data(), 4 * H, H);
            for (std::size_t j = 0; j < H; ++j)
                w.dc_rec[j] = w.dc[j] * lc.f[t * H + j];
        }
        if (li == 0)
            kn::axpy(1.0, w.d_seq_in.data(), w.d_emb.data(), T * H);
        else
            std::swap(w.d_seq_out, w.d_seq_in);
    }

    // embedding
    for (std::size_t t = 0; t < T; ++t) {
        const double in2[2] = {inputs[t], positions[t]};
        kn::outer_acc(g.emb_w, &w.d_emb[t * H], in2, H, 2);
        kn::axpy(1.0, &w.d_emb[t * H], g.emb_b, H);
    }
}

void check_io(const ForecasterConfig& cfg, std::span<const double> inputs,
              std::span<const double> positions) {
    require(inputs.size() == cfg.input_len, "expected ", cfg.input_len, " input values, got ",
            inputs.size());
    require(positions.size() == cfg.input_len, "expected ", cfg.input_len,
            " position covariates, got ", positions.size());
}

} // namespace

const TensorInfo& ForecasterParams::info(std::string_view name) const {
    for (const auto& t : layout)
        if (t.name == name)
            return t;
    fail("unknown tensor '", std::string(name), "'");
}

std::span<double> ForecasterParams::tensor(std::string_view name) {
    const TensorInfo& t = info(name);
    return {data.data() + t.offset, t.rows * t.cols};
}

std::span<const double> ForecasterParams::tensor(std::string_view name) const {
    const TensorInfo& t = info(name);
    return {data.data() + t.offset, t.rows * t.cols};
}

ForecasterParams init(const ForecasterConfig& config) {
    config.validate();
    ForecasterParams p;
    p.config = config;
    std::size_t total = 0;
    p.layout = build_layout(config, total);
    p.data.assign(total, 0.0);
    std::mt19937_64 rng(config.seed ^ kInitStream);
    for (const auto& t : p.layout) {
        double* dst = p.data.data() + t.offset;
        if (t.name.find(".b") != std::string::npos)
            continue; // biases and layer-norm shifts stay zero
        if (t.name.find(".gamma") != std::string::npos) {
            std::fill(dst, dst + t.rows * t.cols, 1.0);
            continue;
        }
        const double bound = 1.0 / std::sqrt(static_cast<double>(t.cols));
        for (std::size_t i = 0; i < t.rows * t.cols; ++i)
            dst[i] = (2.0 * uniform_unit(rng) - 1.0) * bound;
    }
    return p;
}

std::vector<double> forward_outputs(const ForecasterParams& params,
                                    std::span<const double> inputs,
                                    std::span<const double> positions) {
    check_io(params.config, inputs, positions);
    NetView n = wire_const(params);
    Workspace w(params.config);
    forward_cache(n, inputs, positions, w);
    for (double v : w.outputs)
        require(std::isfinite(v), "non-finite forecaster output");
    return w.outputs;
}

double forward(const ForecasterParams& params, std::span<const double> inputs,
               std::span<const double> positions) {
    return forward_outputs(params, inputs, positions)[params.config.median_index()];
}

double loss_and_gradient(const ForecasterParams& params, const TrainingSample& sample,
                         std::span<double> grad) {
    check_io(params.config, sample.inputs, sample.positions);
    require(grad.size() == params.data.size(), "gradient buffer size mismatch");
    NetView n = wire_const(params);
    NetView g = wire(params.config, params.layout, grad.data());
    Workspace w(params.config);
    forward_cache(n, sample.inputs, sample.positions, w);
    const double loss = loss_and_dout(params.config, w.outputs, sample.target, w.dout);
    backward(n, g, sample.inputs, sample.positions, w);
    return loss;
}

TrainingReport train(ForecasterParams& params, std::span<const TrainingSample> samples) {
    const ForecasterConfig& cfg = params.config;
    cfg.validate();
    require(!samples.empty(), "cannot train on an empty sample list");
    for (const auto& s : samples) {
        require(s.inputs.size() == cfg.input_len && s.positions.size() == cfg.input_len,
                "training sample does not match input_len ", cfg.input_len);
    }

    TrainingReport report;
    params.sample_count = samples.size();
    if (cfg.epochs == 0)
        return report;

    NetView n = wire_const(params);
    Workspace w(cfg);
    std::vector<double> grad(params.data.size(), 0.0);
    NetView g = wire(cfg, params.layout, grad.data());
    std::vector<double> adam_m(params.data.size(), 0.0);
    std::vector<double> adam_v(params.data.size(), 0.0);
    std::mt19937_64 rng(cfg.seed ^ kShuffleStream);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::size_t step = 0;
    double bias1 = 1.0, bias2 = 1.0; // running beta^t products
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_portable(order, rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            zero(grad.data(), grad.size());
            for (std::size_t idx = start; idx < end; ++idx) {
                const TrainingSample& s = samples[order[idx]];
                forward_cache(n, s.inputs, s.positions, w);
                epoch_loss += loss_and_dout(cfg, w.outputs, s.target, w.dout);
                backward(n, g, s.inputs, s.positions, w);
            }
            kernels::scale(1.0 / static_cast<double>(end - start), grad.data(), grad.size());
            ++step;
            bias1 *= kAdamBeta1;
            bias2 *= kAdamBeta2;
            kernels::adam_step(params.data.data(), adam_m.data(), adam_v.data(), grad.data(),
                               grad.size(), cfg.learning_rate, kAdamBeta1, kAdamBeta2,
                               kAdamEps, 1.0 / (1.0 - bias1), 1.0 / (1.0 - bias2));
        }
        epoch_loss /= static_cast<double>(samples.size());
        require(std::isfinite(epoch_loss), "training diverged at epoch ", epoch,
                " (non-finite loss)");
        report.epoch_mean_loss.push_back(epoch_loss);
    }
    params.final_loss = report.epoch_mean_loss.back();
    return report;
}

double gradient_check(const ForecasterConfig& config, const TrainingSample& sample,
                      double fd_step) {
    ForecasterParams params = init(config);
    std::vector<double> grad(params.data.size(), 0.0);
    loss_and_gradient(params, sample, grad);

    NetView n = wire_const(params);
    Workspace w(config);
    auto loss_at = [&]() {
        forward_cache(n, sample.inputs, sample.positions, w);
        std::vector<double> dout(config.output_count());
        return loss_and_dout(config, w.outputs, sample.target, dout);
    };

    double max_rel = 0.0;
    for (std::size_t i = 0; i < params.data.size(); ++i) {
        const double saved = params.data[i];
        params.data[i] = saved + fd_step;
        const double lp = loss_at();
        params.data[i] = saved - fd_step;
        const double lm = loss_at();
        params.data[i] = saved;
        const double numeric = (lp - lm) / (2.0 * fd_step);
        const double rel = std::abs(grad[i] - numeric) /
                           std::max({std::abs(grad[i]), std::abs(numeric), 1e-6});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

double naive_baseline(std::span<const double> last_values) {
    require(!last_values.empty(), "naive baseline needs at least one value");
    return last_values.back();
}

namespace {

std::string config_canonical(const ForecasterConfig& c) {
    std::ostringstream os;
    os << "input_len=" << c.input_len << ";output_len=" << c.output_len
       << ";hidden_size=" << c.hidden_size << ";recurrent_layers=" << c.recurrent_layers
       << ";attention_heads=" << c.attention_heads << ";epochs=" << c.epochs
       << ";learning_rate=" << format_g17(c.learning_rate) << ";batch_size=" << c.batch_size
       << ";loss=" << loss_name(c.loss) << ";quantiles=";
    for (std::size_t i = 0; i < c.quantiles.size(); ++i)
        os << (i ? "," : "") << format_g17(c.quantiles[i]);
    os << ";seed=" << c.seed;
    return os.str();
}

double parse_double_token(const std::string& tok, const char* what) {
    if (tok == "nan")
        return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    require(ec == std::errc() && ptr == tok.data() + tok.size(), "malformed ", what, ": '",
            tok, "'");
    return v;
}

} // namespace

std::uint64_t config_hash(const ForecasterConfig& config) {
    return fnv1a64(config_canonical(config));
}

void save(const ForecasterParams& params, const std::filesystem::path& path) {
    std::ofstream out(path);
    require(out.good(), "cannot write model to ", path.string());
    const ForecasterConfig& c = params.config;
    out << "catcast-forecaster 1\n";
    out << "input_len " << c.input_len << '\n';
    out << "output_len " << c.output_len << '\n';
    out << "hidden_size " << c.hidden_size << '\n';
    out << "recurrent_layers " << c.recurrent_layers << '\n';
    out << "attention_heads " << c.attention_heads << '\n';
    out << "epochs " << c.epochs << '\n';
    out << "learning_rate " << format_g17(c.learning_rate) << '\n';
    out << "batch_size " << c.batch_size << '\n';
    out << "loss " << loss_name(c.loss) << '\n';
    out << "quantiles " << c.quantiles.size();
    for (double q : c.quantiles)
        out << ' ' << format_g17(q);
    out << '\n';
    out << "seed " << c.seed << '\n';
    out << "final_loss " << (std::isnan(params.final_loss) ? "nan" : format_g17(params.final_loss))
        << '\n';
    out << "sample_count " << params.sample_count << '\n';
    out << "tensors " << params.layout.size() << '\n';
    for (const auto& t : params.layout) {
        out << "tensor " << t.name << ' ' << t.rows << ' ' << t.cols << '\n';
        const double* v = params.data.data() + t.offset;
        for (std::size_t r = 0; r < t.rows; ++r) {
            for (std::size_t cidx = 0; cidx < t.cols; ++cidx)
                out << (cidx ? " " : "") << format_g17(v[r * t.cols + cidx]);
            out << '\n';
        }
    }
    out.flush();
    require(out.good(), "write failed for ", path.string());
}

ForecasterParams load(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open model file ", path.string());
    std::string magic;
    int version = 0;
    in >> magic >> version;
    require(magic == "catcast-forecaster", "not a forecaster file: ", path.string());
    require(version == 1, "unsupported forecaster version ", version,
            " (this build reads version 1)");

    ForecasterConfig c;
    auto expect_key = [&](const char* key) {
        std::string k;
        in >> k;
        require(in.good() && k == key, "malformed model file: expected '", key, "'");
    };
    std::string tok;
    expect_key("input_len");
    in >> c.input_len;
    expect_key("output_len");
    in >> c.output_len;
    expect_key("hidden_size");
    in >> c.hidden_size;
    expect_key("recurrent_layers");
    in >> c.recurrent_layers;
    expect_key("attention_heads");
    in >> c.attention_heads;
    expect_key("epochs");
    in >> c.epochs;
    expect_key("learning_rate");
    in >> tok;
    c.learning_rate = parse_double_token(tok, "learning_rate");
    expect_key("batch_size");
    in >> c.batch_size;
    expect_key("loss");
    in >> tok;
    c.loss = loss_from_name(tok);
    expect_key("quantiles");
    std::size_t nq = 0;
    in >> nq;
    require(nq < 64, "implausible quantile count");
    c.quantiles.resize(nq);
    for (auto& q : c.quantiles) {
        in >> tok;
        q = parse_double_token(tok, "quantile");
    }
    expect_key("seed");
    in >> c.seed;

    ForecasterParams p;
    p.config = c;
    std::size_t total = 0;
    p.layout = build_layout(c, total);
    p.data.assign(total, 0.0);

    expect_key("final_loss");
    in >> tok;
    p.final_loss = parse_double_token(tok, "final_loss");
    expect_key("sample_count");
    in >> p.sample_count;
    expect_key("tensors");
    std::size_t ntensors = 0;
    in >> ntensors;
    require(ntensors == p.layout.size(), "tensor count ", ntensors, " does not match layout (",
            p.layout.size(), ")");
    for (const auto& t : p.layout) {
        expect_key("tensor");
        std::string name;
        std::size_t rows = 0, cols = 0;
        in >> name >> rows >> cols;
        require(name == t.name, "tensor order mismatch: got '", name, "', expected '", t.name,
                "'");
        require(rows == t.rows && cols == t.cols, "shape mismatch for ", name, ": file has ",
                rows, "x", cols, ", config implies ", t.rows, "x", t.cols);
        double* v = p.data.data() + t.offset;
        for (std::size_t i = 0; i < rows * cols; ++i) {
            in >> tok;
            require(in.good(), "truncated tensor ", name);
            v[i] = parse_double_token(tok, "weight");
            require(std::isfinite(v[i]), "non-finite weight in tensor ", name);
        }
    }
    return p;
}

double predict_step(const ModelStore& store, cat::CategoryId category,
                    std::span<const double> last_values) {
    auto it = store.models.find(category);
    require(it != store.models.end(), "no model for category ", category,
            " (unseen in training data)");
    std::vector<double> positions(last_values.size());
    for (std::size_t i = 0; i < positions.size(); ++i)
        positions[i] = static_cast<double>(i + 1);
    return forward(it->second, last_values, positions);
}

void save_store(const ModelStore& store, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    char buf[32];
    JsonWriter w;
    w.begin_object();
    w.field("format", "catcast-models");
    w.field("version", 1);
    w.key("scheme");
    w.begin_object();
    w.field("window_len", store.scheme.window_len);
    w.field("bit_count", store.scheme.bit_count);
    w.field("basis", cat::basis_name(store.scheme.basis));
    w.end_object();
    w.key("config");
    w.begin_object();
    w.field("input_len", store.config.input_len);
    w.field("output_len", store.config.output_len);
    w.field("hidden_size", store.config.hidden_size);
    w.field("recurrent_layers", store.config.recurrent_layers);
    w.field("attention_heads", store.config.attention_heads);
    w.field("epochs", store.config.epochs);
    w.field("learning_rate", store.config.learning_rate);
    w.field("batch_size", store.config.batch_size);
    w.field("loss", loss_name(store.config.loss));
    w.key("quantiles");
    w.begin_array();
    for (double q : store.config.quantiles)
        w.value(q);
    w.end_array();
    w.field("seed", store.config.seed);
    w.end_object();
    w.field("config_hash", hex_u64(config_hash(store.config)));
    w.field("dataset_hash", hex_u64(store.dataset_hash));
    w.key("models");
    w.begin_array();
    for (const auto& [c, params] : store.models) {
        std::snprintf(buf, sizeof(buf), "cat_%03u.txt", c);
        w.begin_object();
        w.field("category", static_cast<std::int64_t>(c));
        w.field("file", buf);
        w.field("sample_count", params.sample_count);
        w.key("final_loss");
        if (std::isnan(params.final_loss))
            w.null();
        else
            w.value(params.final_loss);
        w.end_object();
        save(params, dir / buf);
    }
    w.end_array();
    w.end_object();
    std::ofstream out(dir / "manifest.json");
    require(out.good(), "cannot write model manifest in ", dir.string());
    out << w.str() << '\n';
}

ModelStore load_store(const std::filesystem::path& dir) {
    std::ifstream min(dir / "manifest.json");
    require(min.good(), "cannot open model manifest in ", dir.string());
    nlohmann::json manifest = nlohmann::json::parse(min);
    require(manifest.value("format", "") == "catcast-models", "not a model store: ",
            dir.string());
    require(manifest.value("version", 0) == 1, "unsupported model store version");

    ModelStore store;
    store.scheme.window_len = manifest["scheme"]["window_len"].get<std::size_t>();
    store.scheme.bit_count = manifest["scheme"]["bit_count"].get<std::size_t>();
    store.scheme.basis = cat::basis_from_name(manifest["scheme"]["basis"].get<std::string>());
    store.scheme.validate();
    store.dataset_hash = std::stoull(manifest["dataset_hash"].get<std::string>(), nullptr, 16);

    const auto& jc = manifest["config"];
    store.config.input_len = jc["input_len"].get<std::size_t>();
    store.config.output_len = jc["output_len"].get<std::size_t>();
    store.config.hidden_size = jc["hidden_size"].get<std::size_t>();
    store.config.recurrent_layers = jc["recurrent_layers"].get<std::size_t>();
    store.config.attention_heads = jc["attention_heads"].get<std::size_t>();
    store.config.epochs = jc["epochs"].get<std::size_t>();
    store.config.learning_rate = jc["learning_rate"].get<double>();
    store.config.batch_size = jc["batch_size"].get<std::size_t>();
    store.config.loss = loss_from_name(jc["loss"].get<std::string>());
    store.config.quantiles = jc["quantiles"].get<std::vector<double>>();
    store.config.seed = jc["seed"].get<std::uint64_t>();
    store.config.validate();
    require(hex_u64(config_hash(store.config)) == manifest["config_hash"].get<std::string>(),
            "model store config hash mismatch");

    for (const auto& entry : manifest["models"]) {
        const auto c = entry["category"].get<cat::CategoryId>();
        ForecasterParams p = load(dir / entry["file"].get<std::string>());
        // Per-model seeds are derived from the base seed; everything
        // architectural must agree with the store config.
        ForecasterConfig probe = p.config;
        probe.seed = store.config.seed;
        require(probe == store.config, "model for category ", c,
                " does not match the store config");
        store.models.emplace(c, std::move(p));
    }
    return store;
}

} // namespace catcast::fc
