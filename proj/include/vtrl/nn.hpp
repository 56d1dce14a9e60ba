#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "vtrl/common.hpp"

// Minimal layer toolkit: fixed-size dense layers with explicit forward and
// backward passes, double precision, single-threaded. Everything the nets in
// this project need and nothing more.
namespace vtrl::nn {

struct ParamRef {
    std::string name;
    real* w = nullptr;
    real* g = nullptr;
    std::size_t n = 0;
};

using Params = std::vector<ParamRef>;

inline std::size_t param_count(const Params& ps) {
    std::size_t n = 0;
    for (const auto& p : ps) n += p.n;
    return n;
}

inline void zero_grads(const Params& ps) {
    for (const auto& p : ps) std::fill(p.g, p.g + p.n, 0.0);
}

inline real init_normal(Rng& rng, real stddev) {
    return std::normal_distribution<real>(0.0, stddev)(rng);
}

// ---------------------------------------------------------------------------
// Adam. lr = 0 leaves parameters bit-identical (w -= 0).
// ---------------------------------------------------------------------------

struct AdamConfig {
    real lr = 1e-3;
    real beta1 = 0.9;
    real beta2 = 0.999;
    real eps = 1e-8;
};

struct Adam {
    AdamConfig cfg;
    std::vector<std::vector<real>> m, v;
    long long t = 0;

    explicit Adam(const AdamConfig& c = {}) : cfg(c) {}

    void attach(const Params& ps) {
        m.clear();
        v.clear();
        for (const auto& p : ps) {
            m.emplace_back(p.n, 0.0);
            v.emplace_back(p.n, 0.0);
        }
        t = 0;
    }

    void step(const Params& ps) {
        if (m.size() != ps.size()) attach(ps);
        ++t;
        const real bc1 = 1.0 - std::pow(cfg.beta1, static_cast<real>(t));
        const real bc2 = 1.0 - std::pow(cfg.beta2, static_cast<real>(t));
        for (std::size_t i = 0; i < ps.size(); ++i) {
            real* w = ps[i].w;
            const real* g = ps[i].g;
            real* mi = m[i].data();
            real* vi = v[i].data();
            for (std::size_t j = 0; j < ps[i].n; ++j) {
                mi[j] = cfg.beta1 * mi[j] + (1.0 - cfg.beta1) * g[j];
                vi[j] = cfg.beta2 * vi[j] + (1.0 - cfg.beta2) * g[j] * g[j];
                const real mhat = mi[j] / bc1;
                const real vhat = vi[j] / bc2;
                w[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Layers. Data layout for images: row-major H x W x C (channel-last).
// ---------------------------------------------------------------------------

struct Conv2d {
    int in_h = 0, in_w = 0, in_ch = 0, out_ch = 0, k = 3, stride = 1, pad = 1;
    int out_h = 0, out_w = 0;
    std::vector<real> w, b, gw, gb;
    std::vector<real> x_cache, y;

    void configure(int ih, int iw, int ic, int oc, int kk, int s, int p, Rng& rng) {
        in_h = ih; in_w = iw; in_ch = ic; out_ch = oc; k = kk; stride = s; pad = p;
        out_h = (ih + 2 * p - kk) / s + 1;
        out_w = (iw + 2 * p - kk) / s + 1;
        w.resize(static_cast<std::size_t>(oc) * kk * kk * ic);
        b.assign(static_cast<std::size_t>(oc), 0.0);
        gw.assign(w.size(), 0.0);
        gb.assign(b.size(), 0.0);
        const real stddev = std::sqrt(2.0 / (static_cast<real>(kk) * kk * ic));
        for (auto& x : w) x = init_normal(rng, stddev);
        y.assign(static_cast<std::size_t>(out_h) * out_w * oc, 0.0);
    }

    const std::vector<real>& forward(const std::vector<real>& x) {
        x_cache = x;
        for (int oy = 0; oy < out_h; ++oy)
            for (int ox = 0; ox < out_w; ++ox)
                for (int oc = 0; oc < out_ch; ++oc) {
                    real acc = b[static_cast<std::size_t>(oc)];
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= in_h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= in_w) continue;
                            const real* xr = &x[(static_cast<std::size_t>(iy) * in_w + ix) * in_ch];
                            const real* wr = &w[((static_cast<std::size_t>(oc) * k + ky) * k + kx) * in_ch];
                            for (int ic = 0; ic < in_ch; ++ic) acc += wr[ic] * xr[ic];
                        }
                    }
                    y[(static_cast<std::size_t>(oy) * out_w + ox) * out_ch + oc] = acc;
                }
        return y;
    }

    std::vector<real> backward(const std::vector<real>& gy) {
        std::vector<real> gx(x_cache.size(), 0.0);
        for (int oy = 0; oy < out_h; ++oy)
            for (int ox = 0; ox < out_w; ++ox)
                for (int oc = 0; oc < out_ch; ++oc) {
                    const real g = gy[(static_cast<std::size_t>(oy) * out_w + ox) * out_ch + oc];
                    if (g == 0.0) continue;
                    gb[static_cast<std::size_t>(oc)] += g;
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= in_h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= in_w) continue;
                            const std::size_t xoff = (static_cast<std::size_t>(iy) * in_w + ix) * in_ch;
                            const std::size_t woff = ((static_cast<std::size_t>(oc) * k + ky) * k + kx) * in_ch;
                            for (int ic = 0; ic < in_ch; ++ic) {
                                gw[woff + ic] += g * x_cache[xoff + ic];
                                gx[xoff + ic] += g * w[woff + ic];
                            }
                        }
                    }
                }
        return gx;
    }

    void collect(Params& ps, const std::string& prefix) {
        ps.push_back({prefix + ".w", w.data(), gw.data(), w.size()});
        ps.push_back({prefix + ".b", b.data(), gb.data(), b.size()});
    }
};

struct Linear {
    int in_n = 0, out_n = 0;
    bool with_bias = true;
    std::vector<real> w, b, gw, gb;
    std::vector<real> x_cache, y;

    void configure(int in, int out, Rng& rng, bool bias = true) {
        in_n = in; out_n = out; with_bias = bias;
        w.resize(static_cast<std::size_t>(out) * in);
        b.assign(static_cast<std::size_t>(out), 0.0);
        gw.assign(w.size(), 0.0);
        gb.assign(b.size(), 0.0);
        const real stddev = std::sqrt(2.0 / static_cast<real>(in));
        for (auto& x : w) x = init_normal(rng, stddev);
        y.assign(static_cast<std::size_t>(out), 0.0);
    }

    const std::vector<real>& forward(const std::vector<real>& x) {
        x_cache = x;
        for (int o = 0; o < out_n; ++o) {
            real acc = with_bias ? b[static_cast<std::size_t>(o)] : 0.0;
            const real* wr = &w[static_cast<std::size_t>(o) * in_n];
            for (int i = 0; i < in_n; ++i) acc += wr[i] * x[static_cast<std::size_t>(i)];
            y[static_cast<std::size_t>(o)] = acc;
        }
        return y;
    }

    std::vector<real> backward(const std::vector<real>& gy) {
        std::vector<real> gx(static_cast<std::size_t>(in_n), 0.0);
        for (int o = 0; o < out_n; ++o) {
            const real g = gy[static_cast<std::size_t>(o)];
            if (with_bias) gb[static_cast<std::size_t>(o)] += g;
            const std::size_t off = static_cast<std::size_t>(o) * in_n;
            for (int i = 0; i < in_n; ++i) {
                gw[off + i] += g * x_cache[static_cast<std::size_t>(i)];
                gx[static_cast<std::size_t>(i)] += g * w[off + i];
            }
        }
        return gx;
    }

    void collect(Params& ps, const std::string& prefix) {
        ps.push_back({prefix + ".w", w.data(), gw.data(), w.size()});
        if (with_bias) ps.push_back({prefix + ".b", b.data(), gb.data(), b.size()});
    }
};

struct LeakyRelu {
    real slope = 0.0;
    std::vector<real> x_cache, y;

    const std::vector<real>& forward(const std::vector<real>& x) {
        x_cache = x;
        y.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
        return y;
    }
    std::vector<real> backward(const std::vector<real>& gy) {
        std::vector<real> gx(gy.size());
        for (std::size_t i = 0; i < gy.size(); ++i)
            gx[i] = x_cache[i] > 0.0 ? gy[i] : slope * gy[i];
        return gx;
    }
};

struct SigmoidLayer {
    std::vector<real> y;
    const std::vector<real>& forward(const std::vector<real>& x) {
        y.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
        return y;
    }
    std::vector<real> backward(const std::vector<real>& gy) {
        std::vector<real> gx(gy.size());
        for (std::size_t i = 0; i < gy.size(); ++i) gx[i] = gy[i] * y[i] * (1.0 - y[i]);
        return gx;
    }
};

struct GlobalAvgPool {
    int h = 0, w = 0, ch = 0;
    std::vector<real> y;

    void configure(int hh, int ww, int cc) { h = hh; w = ww; ch = cc; }

    const std::vector<real>& forward(const std::vector<real>& x) {
        y.assign(static_cast<std::size_t>(ch), 0.0);
        for (int i = 0; i < h * w; ++i)
            for (int c = 0; c < ch; ++c) y[static_cast<std::size_t>(c)] += x[static_cast<std::size_t>(i) * ch + c];
        const real inv = 1.0 / (static_cast<real>(h) * w);
        for (auto& v : y) v *= inv;
        return y;
    }
    std::vector<real> backward(const std::vector<real>& gy) {
        std::vector<real> gx(static_cast<std::size_t>(h) * w * ch);
        const real inv = 1.0 / (static_cast<real>(h) * w);
        for (int i = 0; i < h * w; ++i)
            for (int c = 0; c < ch; ++c) gx[static_cast<std::size_t>(i) * ch + c] = gy[static_cast<std::size_t>(c)] * inv;
        return gx;
    }
};

struct UpsampleNearest2x {
    int h = 0, w = 0, ch = 0;  // input dims
    std::vector<real> y;

    void configure(int hh, int ww, int cc) { h = hh; w = ww; ch = cc; }

    const std::vector<real>& forward(const std::vector<real>& x) {
        y.assign(static_cast<std::size_t>(4) * h * w * ch, 0.0);
        const int ow = 2 * w;
        for (int yy = 0; yy < 2 * h; ++yy)
            for (int xx = 0; xx < ow; ++xx)
                for (int c = 0; c < ch; ++c)
                    y[(static_cast<std::size_t>(yy) * ow + xx) * ch + c] =
                        x[(static_cast<std::size_t>(yy / 2) * w + xx / 2) * ch + c];
        return y;
    }
    std::vector<real> backward(const std::vector<real>& gy) {
        std::vector<real> gx(static_cast<std::size_t>(h) * w * ch, 0.0);
        const int ow = 2 * w;
        for (int yy = 0; yy < 2 * h; ++yy)
            for (int xx = 0; xx < ow; ++xx)
                for (int c = 0; c < ch; ++c)
                    gx[(static_cast<std::size_t>(yy / 2) * w + xx / 2) * ch + c] +=
                        gy[(static_cast<std::size_t>(yy) * ow + xx) * ch + c];
        return gx;
    }
};

// Token embedding table. Rows indexed by token id; backward scatters grads
// into the rows used in the last forward.
struct Embedding {
    int vocab = 0, dim = 0;
    std::vector<real> w, gw;
    std::vector<int> ids_cache;

    void configure(int v, int d, Rng& rng) {
        vocab = v; dim = d;
        w.resize(static_cast<std::size_t>(v) * d);
        gw.assign(w.size(), 0.0);
        for (auto& x : w) x = init_normal(rng, 0.1);
    }

    std::vector<real> forward(const std::vector<int>& ids) {
        ids_cache = ids;
        std::vector<real> y(ids.size() * static_cast<std::size_t>(dim));
        for (std::size_t t = 0; t < ids.size(); ++t) {
            const int id = ids[t];
            if (id < 0 || id >= vocab) throw shape_error("embedding id out of range");
            std::memcpy(&y[t * static_cast<std::size_t>(dim)], &w[static_cast<std::size_t>(id) * dim],
                        sizeof(real) * static_cast<std::size_t>(dim));
        }
        return y;
    }
    void backward(const std::vector<real>& gy) {
        for (std::size_t t = 0; t < ids_cache.size(); ++t) {
            const std::size_t row = static_cast<std::size_t>(ids_cache[t]) * dim;
            for (int d = 0; d < dim; ++d) gw[row + d] += gy[t * static_cast<std::size_t>(dim) + d];
        }
    }
    void collect(Params& ps, const std::string& prefix) {
        ps.push_back({prefix + ".w", w.data(), gw.data(), w.size()});
    }
};

// 1-d convolution over time (width 3, zero padding), T x Cin -> T x Cout.
struct TemporalConv {
    int in_ch = 0, out_ch = 0;
    std::vector<real> w, b, gw, gb;  // w[oc][d][ic], d in {0,1,2}
    std::vector<real> x_cache;
    int t_cache = 0;

    void configure(int ic, int oc, Rng& rng) {
        in_ch = ic; out_ch = oc;
        w.resize(static_cast<std::size_t>(oc) * 3 * ic);
        b.assign(static_cast<std::size_t>(oc), 0.0);
        gw.assign(w.size(), 0.0);
        gb.assign(b.size(), 0.0);
        const real stddev = std::sqrt(2.0 / (3.0 * ic));
        for (auto& x : w) x = init_normal(rng, stddev);
    }

    std::vector<real> forward(const std::vector<real>& x, int T) {
        x_cache = x;
        t_cache = T;
        std::vector<real> y(static_cast<std::size_t>(T) * out_ch, 0.0);
        for (int t = 0; t < T; ++t)
            for (int oc = 0; oc < out_ch; ++oc) {
                real acc = b[static_cast<std::size_t>(oc)];
                for (int d = 0; d < 3; ++d) {
                    const int tt = t + d - 1;
                    if (tt < 0 || tt >= T) continue;
                    const real* xr = &x[static_cast<std::size_t>(tt) * in_ch];
                    const real* wr = &w[(static_cast<std::size_t>(oc) * 3 + d) * in_ch];
                    for (int ic = 0; ic < in_ch; ++ic) acc += wr[ic] * xr[ic];
                }
                y[static_cast<std::size_t>(t) * out_ch + oc] = acc;
            }
        return y;
    }

    std::vector<real> backward(const std::vector<real>& gy) {
        const int T = t_cache;
        std::vector<real> gx(static_cast<std::size_t>(T) * in_ch, 0.0);
        for (int t = 0; t < T; ++t)
            for (int oc = 0; oc < out_ch; ++oc) {
                const real g = gy[static_cast<std::size_t>(t) * out_ch + oc];
                gb[static_cast<std::size_t>(oc)] += g;
                for (int d = 0; d < 3; ++d) {
                    const int tt = t + d - 1;
                    if (tt < 0 || tt >= T) continue;
                    const std::size_t xoff = static_cast<std::size_t>(tt) * in_ch;
                    const std::size_t woff = (static_cast<std::size_t>(oc) * 3 + d) * in_ch;
                    for (int ic = 0; ic < in_ch; ++ic) {
                        gw[woff + ic] += g * x_cache[xoff + ic];
                        gx[xoff + ic] += g * w[woff + ic];
                    }
                }
            }
        return gx;
    }

    void collect(Params& ps, const std::string& prefix) {
        ps.push_back({prefix + ".w", w.data(), gw.data(), w.size()});
        ps.push_back({prefix + ".b", b.data(), gb.data(), b.size()});
    }
};

// Vanilla tanh recurrence, full BPTT. forward() returns all hidden states
// (T x hidden); callers pool them as they like and push the pooled gradient
// back through backward().
struct Rnn {
    int in_ch = 0, hidden = 0;
    std::vector<real> wx, wh, b, gwx, gwh, gb;
    std::vector<real> x_cache, h_cache;  // h_cache: T x hidden
    int t_cache = 0;

    void configure(int ic, int h, Rng& rng) {
        in_ch = ic; hidden = h;
        wx.resize(static_cast<std::size_t>(h) * ic);
        wh.resize(static_cast<std::size_t>(h) * h);
        b.assign(static_cast<std::size_t>(h), 0.0);
        gwx.assign(wx.size(), 0.0);
        gwh.assign(wh.size(), 0.0);
        gb.assign(b.size(), 0.0);
        const real sx = std::sqrt(1.0 / ic), sh = std::sqrt(1.0 / h);
        for (auto& v : wx) v = init_normal(rng, sx);
        for (auto& v : wh) v = init_normal(rng, sh);
    }

    std::vector<real> forward(const std::vector<real>& x, int T) {
        x_cache = x;
        t_cache = T;
        h_cache.assign(static_cast<std::size_t>(T) * hidden, 0.0);
        std::vector<real> hprev(static_cast<std::size_t>(hidden), 0.0);
        for (int t = 0; t < T; ++t) {
            for (int j = 0; j < hidden; ++j) {
                real acc = b[static_cast<std::size_t>(j)];
                const real* wxr = &wx[static_cast<std::size_t>(j) * in_ch];
                const real* xr = &x[static_cast<std::size_t>(t) * in_ch];
                for (int i = 0; i < in_ch; ++i) acc += wxr[i] * xr[i];
                const real* whr = &wh[static_cast<std::size_t>(j) * hidden];
                for (int i = 0; i < hidden; ++i) acc += whr[i] * hprev[static_cast<std::size_t>(i)];
                h_cache[static_cast<std::size_t>(t) * hidden + j] = std::tanh(acc);
            }
            std::memcpy(hprev.data(), &h_cache[static_cast<std::size_t>(t) * hidden],
                        sizeof(real) * static_cast<std::size_t>(hidden));
        }
        return h_cache;
    }

    std::vector<real> backward(const std::vector<real>& gh_seq) {
        const int T = t_cache;
        std::vector<real> gx(static_cast<std::size_t>(T) * in_ch, 0.0);
        std::vector<real> gh_next(static_cast<std::size_t>(hidden), 0.0);
        std::vector<real> d(static_cast<std::size_t>(hidden), 0.0);
        for (int t = T - 1; t >= 0; --t) {
            const real* ht = &h_cache[static_cast<std::size_t>(t) * hidden];
            for (int j = 0; j < hidden; ++j) {
                const real gh = gh_seq[static_cast<std::size_t>(t) * hidden + j] + gh_next[static_cast<std::size_t>(j)];
                d[static_cast<std::size_t>(j)] = gh * (1.0 - ht[j] * ht[j]);
            }
            const real* hprev = t > 0 ? &h_cache[static_cast<std::size_t>(t - 1) * hidden] : nullptr;
            std::fill(gh_next.begin(), gh_next.end(), 0.0);
            for (int j = 0; j < hidden; ++j) {
                const real dj = d[static_cast<std::size_t>(j)];
                gb[static_cast<std::size_t>(j)] += dj;
                const std::size_t wxoff = static_cast<std::size_t>(j) * in_ch;
                const std::size_t xoff = static_cast<std::size_t>(t) * in_ch;
                for (int i = 0; i < in_ch; ++i) {
                    gwx[wxoff + i] += dj * x_cache[xoff + i];
                    gx[xoff + i] += dj * wx[wxoff + i];
                }
                const std::size_t whoff = static_cast<std::size_t>(j) * hidden;
                for (int i = 0; i < hidden; ++i) {
                    gwh[whoff + i] += dj * (hprev ? hprev[i] : 0.0);
                    gh_next[static_cast<std::size_t>(i)] += dj * wh[whoff + i];
                }
            }
        }
        return gx;
    }

    void collect(Params& ps, const std::string& prefix) {
        ps.push_back({prefix + ".wx", wx.data(), gwx.data(), wx.size()});
        ps.push_back({prefix + ".wh", wh.data(), gwh.data(), wh.size()});
        ps.push_back({prefix + ".b", b.data(), gb.data(), b.size()});
    }
};

// ---------------------------------------------------------------------------
// Loss utilities.
// ---------------------------------------------------------------------------

inline std::vector<real> softmax(const std::vector<real>& logits) {
    std::vector<real> p(logits.size());
    const real mx = *std::max_element(logits.begin(), logits.end());
    real z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        z += p[i];
    }
    for (auto& v : p) v /= z;
    return p;
}

// Cross entropy on logits; returns loss, writes d loss / d logits.
inline real softmax_xent(const std::vector<real>& logits, int label, std::vector<real>& glogits) {
    const std::vector<real> p = softmax(logits);
    glogits.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i)
        glogits[i] = p[i] - (static_cast<int>(i) == label ? 1.0 : 0.0);
    return -std::log(std::max(p[static_cast<std::size_t>(label)], 1e-300));
}

// Binary cross entropy on a logit; returns loss, writes d loss / d logit.
inline real bce_logit(real logit, real target, real& glogit) {
    const real p = 1.0 / (1.0 + std::exp(-logit));
    glogit = p - target;
    const real eps = 1e-300;
    return -(target * std::log(std::max(p, eps)) + (1.0 - target) * std::log(std::max(1.0 - p, eps)));
}

inline real sigmoid(real x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// Finite-difference gradient check. Samples weight entries across all param
// buffers and compares analytic gradients against central differences of the
// loss closure. Returns the worst relative error over the sampled slice.
// ---------------------------------------------------------------------------

template <typename LossFn>
real gradient_check(const Params& ps, LossFn&& loss, Rng& rng, int samples = 24, real h = 1e-5) {
    // Analytic pass.
    zero_grads(ps);
    loss(true);
    std::vector<real> analytic;
    std::vector<std::pair<std::size_t, std::size_t>> picks;
    std::uniform_int_distribution<std::size_t> pick_buf(0, ps.size() - 1);
    for (int s = 0; s < samples; ++s) {
        const std::size_t bi = pick_buf(rng);
        std::uniform_int_distribution<std::size_t> pick_idx(0, ps[bi].n - 1);
        const std::size_t wi = pick_idx(rng);
        picks.emplace_back(bi, wi);
        analytic.push_back(ps[bi].g[wi]);
    }
    real worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        auto [bi, wi] = picks[static_cast<std::size_t>(s)];
        const real saved = ps[bi].w[wi];
        ps[bi].w[wi] = saved + h;
        const real lp = loss(false);
        ps[bi].w[wi] = saved - h;
        const real lm = loss(false);
        ps[bi].w[wi] = saved;
        const real numeric = (lp - lm) / (2.0 * h);
        const real a = analytic[static_cast<std::size_t>(s)];
        const real denom = std::max({std::abs(numeric), std::abs(a), 1e-6});
        worst = std::max(worst, std::abs(numeric - a) / denom);
    }
    return worst;
}

}  // namespace vtrl::nn
