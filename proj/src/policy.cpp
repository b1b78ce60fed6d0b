#include "glyphrl/policy.hpp"

#include "glyphrl/blobfile.hpp"
#include "glyphrl/env.hpp"
#include "glyphrl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <unordered_map>

namespace glyphrl {

namespace {

static_assert(kTokenEos == kVocabSize - 1, "EOS must sit at the end of the vocabulary");

void check_dims_match(const PolicyParams& p, const GradSet& g) {
    const PolicyDims& d = p.dims;
    if (g.W1.rows != d.hidden || g.W1.cols != d.input_size() ||
        g.b1.size() != static_cast<std::size_t>(d.hidden) || g.W2.rows != d.vocab ||
        g.W2.cols != d.hidden || g.b2.size() != static_cast<std::size_t>(d.vocab))
        throw std::invalid_argument("gradient shapes do not match policy dims");
}

// z -> log-softmax(z) in place, returns nothing; stable via max shift.
void log_softmax_inplace(std::vector<double>& z) {
    double m = z[0];
    for (double v : z) m = std::max(m, v);
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - m);
    const double lse = m + std::log(sum);
    for (double& v : z) v -= lse;
}

// Per-sequence forward state. The projection and query contributions to the
// pre-activation are fixed along a sequence; only the prefix bag moves, and
// it is sparse, so each step adds at most max_len column updates.
struct SeqForward {
    const PolicyParams* params;
    const Projection* proj;
    std::vector<double> base;       // W1[:, :F].proj + W1[:, F+q] + b1
    std::vector<int> bag;           // prefix token counts
    std::vector<double> a, h, logp;

    SeqForward(const PolicyParams& p, const Projection& pr, int query)
        : params(&p), proj(&pr), bag(p.dims.vocab, 0) {
        const PolicyDims& d = p.dims;
        if (query < 0 || query >= d.shapes)
            throw std::invalid_argument("query shape index out of range");
        base = p.b1;
        for (int r = 0; r < d.hidden; ++r) {
            const double* row = &p.W1.data[static_cast<std::size_t>(r) * p.W1.cols];
            double acc = 0.0;
            for (int c = 0; c < d.feat; ++c) acc += row[c] * pr.feat[c];
            base[r] += acc + row[d.feat + query];
        }
        a.resize(d.hidden);
        h.resize(d.hidden);
        logp.resize(d.vocab);
    }

    // Recomputes h and log-probs for the current bag. Returns logits via logp
    // before normalization when raw is requested.
    void step(std::vector<double>* raw_logits = nullptr) {
        const PolicyDims& d = params->dims;
        const double inv_len = 1.0 / d.max_len;
        a = base;
        for (int v = 0; v < d.vocab; ++v) {
            if (!bag[v]) continue;
            const double w = bag[v] * inv_len;
            const int col = d.feat + d.shapes + v;
            for (int r = 0; r < d.hidden; ++r)
                a[r] += w * params->W1.data[static_cast<std::size_t>(r) * params->W1.cols + col];
        }
        for (int r = 0; r < d.hidden; ++r) h[r] = std::tanh(a[r]);
        for (int v = 0; v < d.vocab; ++v) {
            const double* row = &params->W2.data[static_cast<std::size_t>(v) * params->W2.cols];
            double acc = params->b2[v];
            for (int r = 0; r < d.hidden; ++r) acc += row[r] * h[r];
            logp[v] = acc;
        }
        if (raw_logits) *raw_logits = logp;
        log_softmax_inplace(logp);
    }

    void push(int token) { ++bag[token]; }
};

void validate_eps(double eps_low, double eps_high) {
    if (!(eps_low > 0.0 && eps_low < 1.0) || !(eps_high > 0.0 && eps_high < 1.0))
        throw std::invalid_argument("clip epsilons must lie in (0,1)");
}

void validate_item(const PolicyParams& params, const SurrogateItem& item) {
    if (!item.raster) throw std::invalid_argument("surrogate item has no raster");
    if (item.tokens.size() != item.old_logprobs.size())
        throw std::invalid_argument("surrogate item token/logprob length mismatch");
    if (item.tokens.size() > static_cast<std::size_t>(params.dims.max_len))
        throw std::invalid_argument("surrogate item longer than max_len");
    if (!std::isfinite(item.advantage))
        throw std::invalid_argument("surrogate item has non-finite advantage");
    for (double lp : item.old_logprobs)
        if (!std::isfinite(lp))
            throw std::invalid_argument("surrogate item has non-finite old logprob");
    for (int t : item.tokens)
        if (t < 0 || t >= params.dims.vocab)
            throw std::invalid_argument("surrogate item token out of range");
}

struct SurrogateAccum {
    double term_sum = 0.0;
    std::size_t total_tokens = 0;
    std::size_t clipped_tokens = 0;
};

// Shared core for loss-only and loss+grad evaluation. Gradients accumulate
// d(sum of kept terms)/dtheta; the caller flips sign and divides by the token
// count afterwards.
SurrogateAccum surrogate_core(const PolicyParams& params,
                              const std::vector<SurrogateItem>& batch, double eps_low,
                              double eps_high, GradSet* grads) {
    validate_eps(eps_low, eps_high);
    if (batch.empty()) throw std::invalid_argument("surrogate batch is empty");
    const PolicyDims& d = params.dims;

    SurrogateAccum acc;
    std::unordered_map<const Raster*, Projection> projections;
    std::vector<double> dz(d.vocab), dh(d.hidden), da(d.hidden), item_da(d.hidden);

    for (const SurrogateItem& item : batch) {
        validate_item(params, item);
        acc.total_tokens += item.tokens.size();
        if (item.masked || item.advantage == 0.0 || item.tokens.empty()) continue;

        auto found = projections.find(item.raster);
        if (found == projections.end())
            found = projections.emplace(item.raster, project_raster(params, *item.raster)).first;

        SeqForward fwd(params, found->second, item.query_shape);
        const double A = item.advantage;
        std::fill(item_da.begin(), item_da.end(), 0.0);

        for (std::size_t pos = 0; pos < item.tokens.size(); ++pos) {
            fwd.step();
            const int tok = item.tokens[pos];
            const double rho = std::exp(fwd.logp[tok] - item.old_logprobs[pos]);
            const bool clipped = (A > 0.0 && rho > 1.0 + eps_high) ||
                                 (A < 0.0 && rho < 1.0 - eps_low);
            if (clipped) {
                ++acc.clipped_tokens;
                acc.term_sum += std::clamp(rho, 1.0 - eps_low, 1.0 + eps_high) * A;
            } else {
                acc.term_sum += rho * A;
                if (grads) {
                    // d(term)/dz = A*rho * (e_tok - softmax)
                    const double coef = A * rho;
                    for (int v = 0; v < d.vocab; ++v)
                        dz[v] = coef * ((v == tok ? 1.0 : 0.0) - std::exp(fwd.logp[v]));
                    std::fill(dh.begin(), dh.end(), 0.0);
                    for (int v = 0; v < d.vocab; ++v) {
                        grads->b2[v] += dz[v];
                        double* gw2 = &grads->W2.data[static_cast<std::size_t>(v) * d.hidden];
                        const double* w2 =
                            &params.W2.data[static_cast<std::size_t>(v) * d.hidden];
                        const double dzv = dz[v];
                        for (int r = 0; r < d.hidden; ++r) {
                            gw2[r] += dzv * fwd.h[r];
                            dh[r] += dzv * w2[r];
                        }
                    }
                    const double inv_len = 1.0 / d.max_len;
                    for (int r = 0; r < d.hidden; ++r) {
                        da[r] = dh[r] * (1.0 - fwd.h[r] * fwd.h[r]);
                        grads->b1[r] += da[r];
                        item_da[r] += da[r];
                        double* gw1 = &grads->W1.data[static_cast<std::size_t>(r) * grads->W1.cols];
                        gw1[d.feat + item.query_shape] += da[r];
                        for (int v = 0; v < d.vocab; ++v)
                            if (fwd.bag[v])
                                gw1[d.feat + d.shapes + v] += da[r] * fwd.bag[v] * inv_len;
                    }
                }
            }
            fwd.push(tok);
        }
        if (grads) {
            // The projection block of W1 sees the same input at every step,
            // so one rank-1 update per item covers the whole sequence.
            const std::vector<double>& pf = found->second.feat;
            for (int r = 0; r < d.hidden; ++r) {
                if (item_da[r] == 0.0) continue;
                double* gw1 = &grads->W1.data[static_cast<std::size_t>(r) * grads->W1.cols];
                const double s = item_da[r];
                for (int c = 0; c < d.feat; ++c) gw1[c] += s * pf[c];
            }
        }
    }
    return acc;
}

double finalize_loss(const SurrogateAccum& acc) {
    if (acc.total_tokens == 0) return 0.0;
    return -acc.term_sum / static_cast<double>(acc.total_tokens);
}

}  // namespace

void PolicyDims::validate() const {
    if (feat <= 0 || hidden <= 0 || shapes <= 0 || vocab <= 1 || grid <= 0 || max_len <= 0)
        throw std::invalid_argument("policy dims must be positive");
}

PolicyParams init_policy(const PolicyDims& dims, std::uint64_t rng_seed) {
    dims.validate();
    Rng rng(derive_seed(rng_seed, seed_tag::kPolicyInit));
    auto fill = [&rng](std::vector<double>& v, int fan_in) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& x : v) x = (2.0 * rng.uniform() - 1.0) * scale;
    };
    PolicyParams p;
    p.dims = dims;
    const int pixels = dims.grid * dims.grid;
    p.frozen_proj = Mat(dims.feat, pixels);
    p.W1 = Mat(dims.hidden, dims.input_size());
    p.b1.resize(dims.hidden);
    p.W2 = Mat(dims.vocab, dims.hidden);
    p.b2.resize(dims.vocab);
    fill(p.frozen_proj.data, pixels);
    fill(p.W1.data, dims.input_size());
    fill(p.b1, dims.input_size());
    fill(p.W2.data, dims.hidden);
    fill(p.b2, dims.hidden);
    return p;
}

Projection project_raster(const PolicyParams& params, const Raster& raster) {
    const PolicyDims& d = params.dims;
    const Raster* src = &raster;
    Raster resized;
    if (raster.width != d.grid || raster.height != d.grid) {
        resized = resize_bilinear(raster, d.grid, d.grid);
        src = &resized;
    }
    Projection out;
    out.feat.assign(d.feat, 0.0);
    const int pixels = d.grid * d.grid;
    for (int r = 0; r < d.feat; ++r) {
        const double* row = &params.frozen_proj.data[static_cast<std::size_t>(r) * pixels];
        double acc = 0.0;
        for (int c = 0; c < pixels; ++c) acc += row[c] * src->pixels[c];
        out.feat[r] = acc;
    }
    return out;
}

std::vector<double> token_logits(const PolicyParams& params, const Projection& proj,
                                 int query_shape, const std::vector<int>& prefix) {
    if (prefix.size() >= static_cast<std::size_t>(params.dims.max_len))
        throw std::invalid_argument("prefix must be shorter than max_len");
    SeqForward fwd(params, proj, query_shape);
    for (int t : prefix) {
        if (t < 0 || t >= params.dims.vocab)
            throw std::invalid_argument("prefix token out of range");
        fwd.push(t);
    }
    std::vector<double> logits;
    fwd.step(&logits);
    return logits;
}

std::vector<double> token_logits(const PolicyParams& params, const Raster& raster,
                                 int query_shape, const std::vector<int>& prefix) {
    return token_logits(params, project_raster(params, raster), query_shape, prefix);
}

Trajectory sample_trajectory(const PolicyParams& params, const Projection& proj,
                             int query_shape, double temperature, std::uint64_t rng_seed) {
    if (!(temperature > 0.0))
        throw std::invalid_argument("sampling temperature must be positive");
    Rng rng(derive_seed(rng_seed, seed_tag::kTrajectory));
    const PolicyDims& d = params.dims;
    const int stop = d.vocab - 1;  // EOS sits at the end of the vocabulary

    Trajectory traj;
    SeqForward fwd(params, proj, query_shape);
    std::vector<double> logits, scaled(d.vocab);
    for (int pos = 0; pos < d.max_len; ++pos) {
        fwd.step(&logits);
        for (int v = 0; v < d.vocab; ++v) scaled[v] = logits[v] / temperature;
        log_softmax_inplace(scaled);
        const double u = rng.uniform();
        int tok = d.vocab - 1;
        double cum = 0.0;
        for (int v = 0; v < d.vocab; ++v) {
            cum += std::exp(scaled[v]);
            if (u < cum) {
                tok = v;
                break;
            }
        }
        traj.tokens.push_back(tok);
        traj.old_logprobs_gen.push_back(fwd.logp[tok]);  // temperature-1 value
        if (tok == stop) break;
        fwd.push(tok);
    }
    return traj;
}

Trajectory sample_trajectory(const PolicyParams& params, const Raster& raster,
                             int query_shape, double temperature, std::uint64_t rng_seed) {
    return sample_trajectory(params, project_raster(params, raster), query_shape, temperature,
                             rng_seed);
}

std::vector<double> logprobs_under(const PolicyParams& params, const Projection& proj,
                                   int query_shape, const std::vector<int>& tokens) {
    if (tokens.size() > static_cast<std::size_t>(params.dims.max_len))
        throw std::invalid_argument("token sequence longer than max_len");
    SeqForward fwd(params, proj, query_shape);
    std::vector<double> out;
    out.reserve(tokens.size());
    for (int t : tokens) {
        if (t < 0 || t >= params.dims.vocab)
            throw std::invalid_argument("token out of range");
        fwd.step();
        out.push_back(fwd.logp[t]);
        fwd.push(t);
    }
    return out;
}

std::vector<double> logprobs_under(const PolicyParams& params, const Raster& raster,
                                   int query_shape, const std::vector<int>& tokens) {
    return logprobs_under(params, project_raster(params, raster), query_shape, tokens);
}

std::vector<int> greedy_decode(const PolicyParams& params, const Raster& raster,
                               int query_shape) {
    const PolicyDims& d = params.dims;
    const int stop = d.vocab - 1;
    SeqForward fwd(params, project_raster(params, raster), query_shape);
    std::vector<int> tokens;
    std::vector<double> logits;
    for (int pos = 0; pos < d.max_len; ++pos) {
        fwd.step(&logits);
        int best = 0;
        for (int v = 1; v < d.vocab; ++v)
            if (logits[v] > logits[best]) best = v;
        tokens.push_back(best);
        if (best == stop) break;
        fwd.push(best);
    }
    return tokens;
}

GradSet GradSet::zeros(const PolicyDims& dims) {
    GradSet g;
    g.W1 = Mat(dims.hidden, dims.input_size());
    g.b1.assign(dims.hidden, 0.0);
    g.W2 = Mat(dims.vocab, dims.hidden);
    g.b2.assign(dims.vocab, 0.0);
    return g;
}

bool GradSet::all_zero() const {
    auto zero = [](const std::vector<double>& v) {
        for (double x : v)
            if (x != 0.0) return false;
        return true;
    };
    return zero(W1.data) && zero(b1) && zero(W2.data) && zero(b2);
}

SurrogateResult surrogate_grad(const PolicyParams& params,
                               const std::vector<SurrogateItem>& batch, double eps_low,
                               double eps_high) {
    SurrogateResult res;
    res.grads = GradSet::zeros(params.dims);
    const SurrogateAccum acc = surrogate_core(params, batch, eps_low, eps_high, &res.grads);
    res.loss = finalize_loss(acc);
    if (!std::isfinite(res.loss))
        throw std::invalid_argument("surrogate loss is non-finite; check inputs");
    if (acc.total_tokens > 0) {
        const double scale = -1.0 / static_cast<double>(acc.total_tokens);
        for (double& x : res.grads.W1.data) x *= scale;
        for (double& x : res.grads.b1) x *= scale;
        for (double& x : res.grads.W2.data) x *= scale;
        for (double& x : res.grads.b2) x *= scale;
        res.clip_fraction =
            static_cast<double>(acc.clipped_tokens) / static_cast<double>(acc.total_tokens);
    }
    return res;
}

double surrogate_loss(const PolicyParams& params, const std::vector<SurrogateItem>& batch,
                      double eps_low, double eps_high) {
    const double loss = finalize_loss(surrogate_core(params, batch, eps_low, eps_high, nullptr));
    if (!std::isfinite(loss))
        throw std::invalid_argument("surrogate loss is non-finite; check inputs");
    return loss;
}

double fd_check(const PolicyParams& params, const std::vector<SurrogateItem>& batch,
                double eps_low, double eps_high, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("fd step must be positive");
    const SurrogateResult analytic = surrogate_grad(params, batch, eps_low, eps_high);

    // Differentiability precondition: no ratio may sit within 10h of either
    // clip edge, otherwise central differences straddle the kink.
    for (const SurrogateItem& item : batch) {
        if (item.masked || item.advantage == 0.0) continue;
        const std::vector<double> lps =
            logprobs_under(params, *item.raster, item.query_shape, item.tokens);
        for (std::size_t i = 0; i < lps.size(); ++i) {
            const double rho = std::exp(lps[i] - item.old_logprobs[i]);
            if (std::abs(rho - (1.0 - eps_low)) <= 10.0 * h ||
                std::abs(rho - (1.0 + eps_high)) <= 10.0 * h)
                throw std::invalid_argument("fd_check: batch sits at a clip boundary");
        }
    }

    PolicyParams work = params;
    struct Block {
        double* values;
        const double* grads;
        std::size_t count;
    };
    const Block blocks[] = {
        {work.W1.data.data(), analytic.grads.W1.data.data(), work.W1.data.size()},
        {work.b1.data(), analytic.grads.b1.data(), work.b1.size()},
        {work.W2.data.data(), analytic.grads.W2.data.data(), work.W2.data.size()},
        {work.b2.data(), analytic.grads.b2.data(), work.b2.size()},
    };
    std::size_t total = 0;
    for (const Block& b : blocks) total += b.count;

    std::vector<std::size_t> coords(total);
    for (std::size_t i = 0; i < total; ++i) coords[i] = i;
    const std::size_t subset = std::min<std::size_t>(total, 320);
    Rng rng(derive_seed(0xFDC0DEull, seed_tag::kPool));
    for (std::size_t i = 0; i < subset; ++i) {
        const std::size_t j = i + rng.uniform_int(total - i);
        std::swap(coords[i], coords[j]);
    }

    double max_err = 0.0;
    for (std::size_t k = 0; k < subset; ++k) {
        std::size_t idx = coords[k];
        double* value = nullptr;
        double analytic_g = 0.0;
        for (const Block& b : blocks) {
            if (idx < b.count) {
                value = b.values + idx;
                analytic_g = b.grads[idx];
                break;
            }
            idx -= b.count;
        }
        const double saved = *value;
        *value = saved + h;
        const double up = surrogate_loss(work, batch, eps_low, eps_high);
        *value = saved - h;
        const double down = surrogate_loss(work, batch, eps_low, eps_high);
        *value = saved;
        const double fd = (up - down) / (2.0 * h);
        const double err = std::abs(analytic_g - fd) / std::max(std::abs(fd), 1e-8);
        max_err = std::max(max_err, err);
    }
    return max_err;
}

void sgd_step(PolicyParams& params, const GradSet& grads, double lr) {
    check_dims_match(params, grads);
    for (std::size_t i = 0; i < params.W1.data.size(); ++i)
        params.W1.data[i] -= lr * grads.W1.data[i];
    for (std::size_t i = 0; i < params.b1.size(); ++i) params.b1[i] -= lr * grads.b1[i];
    for (std::size_t i = 0; i < params.W2.data.size(); ++i)
        params.W2.data[i] -= lr * grads.W2.data[i];
    for (std::size_t i = 0; i < params.b2.size(); ++i) params.b2[i] -= lr * grads.b2[i];
}

AdamState AdamState::zeros(const PolicyDims& dims) {
    AdamState s;
    s.mW1 = Mat(dims.hidden, dims.input_size());
    s.vW1 = Mat(dims.hidden, dims.input_size());
    s.mb1.assign(dims.hidden, 0.0);
    s.vb1.assign(dims.hidden, 0.0);
    s.mW2 = Mat(dims.vocab, dims.hidden);
    s.vW2 = Mat(dims.vocab, dims.hidden);
    s.mb2.assign(dims.vocab, 0.0);
    s.vb2.assign(dims.vocab, 0.0);
    return s;
}

void adam_step(AdamState& state, PolicyParams& params, const GradSet& grads, double lr,
               double beta1, double beta2, double eps) {
    check_dims_match(params, grads);
    if (state.mW1.data.size() != params.W1.data.size() ||
        state.mW2.data.size() != params.W2.data.size())
        throw std::invalid_argument("adam state shapes do not match policy dims");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    auto update = [&](double* p, const double* g, double* m, double* v, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    };
    update(params.W1.data.data(), grads.W1.data.data(), state.mW1.data.data(),
           state.vW1.data.data(), params.W1.data.size());
    update(params.b1.data(), grads.b1.data(), state.mb1.data(), state.vb1.data(),
           params.b1.size());
    update(params.W2.data.data(), grads.W2.data.data(), state.mW2.data.data(),
           state.vW2.data.data(), params.W2.data.size());
    update(params.b2.data(), grads.b2.data(), state.mb2.data(), state.vb2.data(),
           params.b2.size());
}

std::uint64_t frozen_proj_checksum(const PolicyParams& params) {
    std::uint64_t hash = 1469598103934665603ull;
    for (double d : params.frozen_proj.data) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, sizeof(bits));
        for (int i = 0; i < 8; ++i) {
            hash ^= (bits >> (8 * i)) & 0xffu;
            hash *= 1099511628211ull;
        }
    }
    return hash;
}

namespace {

nlohmann::ordered_json dims_to_json(const PolicyDims& d) {
    return {{"feat", d.feat},   {"hidden", d.hidden}, {"shapes", d.shapes},
            {"vocab", d.vocab}, {"grid", d.grid},     {"max_len", d.max_len}};
}

PolicyDims dims_from_json(const nlohmann::json& j) {
    PolicyDims d;
    d.feat = j.at("feat").get<int>();
    d.hidden = j.at("hidden").get<int>();
    d.shapes = j.at("shapes").get<int>();
    d.vocab = j.at("vocab").get<int>();
    d.grid = j.at("grid").get<int>();
    d.max_len = j.at("max_len").get<int>();
    d.validate();
    return d;
}

}  // namespace

void save_checkpoint(const std::string& path, const PolicyParams& params,
                     std::int64_t global_step, const std::string& rng_state) {
    const PolicyDims& d = params.dims;
    struct Entry {
        const char* name;
        int rows, cols;
        const std::vector<double>* data;
    };
    const Entry entries[] = {
        {"frozen_proj", d.feat, d.grid * d.grid, &params.frozen_proj.data},
        {"W1", d.hidden, d.input_size(), &params.W1.data},
        {"b1", d.hidden, 1, &params.b1},
        {"W2", d.vocab, d.hidden, &params.W2.data},
        {"b2", d.vocab, 1, &params.b2},
    };
    nlohmann::ordered_json manifest;
    manifest["version"] = 1;
    manifest["dims"] = dims_to_json(d);
    manifest["global_step"] = global_step;
    manifest["rng_state"] = rng_state;
    char checksum[32];
    std::snprintf(checksum, sizeof(checksum), "%016llx",
                  static_cast<unsigned long long>(frozen_proj_checksum(params)));
    manifest["proj_checksum"] = checksum;

    std::vector<double> blob;
    nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
    for (const Entry& e : entries) {
        if (e.data->size() != static_cast<std::size_t>(e.rows) * e.cols)
            throw std::invalid_argument("checkpoint tensor size mismatch");
        tensors.push_back({{"name", e.name},
                           {"rows", e.rows},
                           {"cols", e.cols},
                           {"offset", blob.size()}});
        blob.insert(blob.end(), e.data->begin(), e.data->end());
    }
    manifest["tensors"] = std::move(tensors);
    write_blob_file(path, manifest, blob);
}

Checkpoint load_checkpoint(const std::string& path) {
    BlobFile file = read_blob_file(path);
    const nlohmann::json& manifest = file.manifest;
    if (manifest.at("version").get<int>() != 1)
        throw std::runtime_error("checkpoint " + path + ": unsupported version");

    Checkpoint ckpt;
    ckpt.params.dims = dims_from_json(manifest.at("dims"));
    ckpt.global_step = manifest.at("global_step").get<std::int64_t>();
    ckpt.rng_state = manifest.value("rng_state", "");

    const PolicyDims& d = ckpt.params.dims;
    auto read_tensor = [&](const nlohmann::json& t, int rows, int cols,
                           std::vector<double>& out) {
        if (t.at("rows").get<int>() != rows || t.at("cols").get<int>() != cols)
            throw std::runtime_error("checkpoint " + path + ": tensor shape mismatch for " +
                                     t.at("name").get<std::string>());
        const std::size_t offset = t.at("offset").get<std::size_t>();
        const std::size_t count = static_cast<std::size_t>(rows) * cols;
        if (offset + count > file.blob.size())
            throw std::runtime_error("checkpoint " + path + ": tensor extends past blob");
        out.assign(file.blob.begin() + offset, file.blob.begin() + offset + count);
    };
    const nlohmann::json& tensors = manifest.at("tensors");
    if (!tensors.is_array() || tensors.size() != 5)
        throw std::runtime_error("checkpoint " + path + ": expected 5 tensors");
    const char* expect[] = {"frozen_proj", "W1", "b1", "W2", "b2"};
    for (std::size_t i = 0; i < 5; ++i)
        if (tensors[i].at("name").get<std::string>() != expect[i])
            throw std::runtime_error("checkpoint " + path + ": unexpected tensor order");

    ckpt.params.frozen_proj = Mat(d.feat, d.grid * d.grid);
    read_tensor(tensors[0], d.feat, d.grid * d.grid, ckpt.params.frozen_proj.data);
    ckpt.params.W1 = Mat(d.hidden, d.input_size());
    read_tensor(tensors[1], d.hidden, d.input_size(), ckpt.params.W1.data);
    read_tensor(tensors[2], d.hidden, 1, ckpt.params.b1);
    ckpt.params.W2 = Mat(d.vocab, d.hidden);
    read_tensor(tensors[3], d.vocab, d.hidden, ckpt.params.W2.data);
    read_tensor(tensors[4], d.vocab, 1, ckpt.params.b2);
    return ckpt;
}

}  // namespace glyphrl
