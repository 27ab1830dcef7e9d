#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ffc/common.hpp"
#include "ffc/tensor.hpp"

namespace ffc {

// ---------------------------------------------------------------------------
// Layer specs

enum class ConvKind { standard, depthwise, pointwise };

inline const char* to_string(ConvKind k) {
    switch (k) {
        case ConvKind::standard: return "standard";
        case ConvKind::depthwise: return "depthwise";
        case ConvKind::pointwise: return "pointwise";
    }
    return "?";
}

// Houses D_F, D_K, M, N of the cost formulas.
struct ConvLayerSpec {
    std::int64_t input_length = 0;   // D_F (input side)
    std::int64_t kernel = 1;         // D_K
    std::int64_t in_channels = 0;    // M
    std::int64_t out_channels = 0;   // N
    std::int64_t stride = 1;
    ConvKind kind = ConvKind::standard;

    void validate() const {
        if (input_length <= 0 || in_channels <= 0 || out_channels <= 0 || stride <= 0 || kernel <= 0)
            throw UsageError("ConvLayerSpec: all dimensions must be positive");
        if (kernel % 2 == 0) throw UsageError("ConvLayerSpec: kernel length must be odd, got " + std::to_string(kernel));
        if (kind == ConvKind::depthwise && in_channels != out_channels)
            throw UsageError("ConvLayerSpec: depthwise requires N == M, got M=" + std::to_string(in_channels) +
                             " N=" + std::to_string(out_channels));
        if (kind == ConvKind::pointwise && kernel != 1)
            throw UsageError("ConvLayerSpec: pointwise requires D_K == 1, got " + std::to_string(kernel));
    }

    // same-padding output law
    std::int64_t output_length() const { return (input_length + stride - 1) / stride; }

    std::int64_t pad_left() const {
        std::int64_t total = (output_length() - 1) * stride + kernel - input_length;
        return std::max<std::int64_t>(total, 0) / 2;
    }
};

enum class NormKind { batch, group };

struct NormSpec {
    NormKind kind = NormKind::batch;
    std::int64_t channels = 0;
    std::int64_t groups = 1;  // group kind only
    double epsilon = 1e-5;
    double momentum = 0.1;  // batch kind running-stat update

    void validate() const {
        if (channels <= 0) throw UsageError("NormSpec: channels must be positive");
        if (kind == NormKind::group) {
            if (groups <= 0 || channels % groups != 0)
                throw UsageError("NormSpec: groups (" + std::to_string(groups) + ") must divide channels (" +
                                 std::to_string(channels) + ")");
        }
    }
};

// Affine parameters plus batch-kind running statistics. The first train-mode
// batch replaces the running statistics outright (the init values carry no
// information and at momentum 0.1 would poison eval for ~100 batches);
// later batches blend in with the configured momentum.
template <typename T>
struct NormState {
    Tensor<T> gamma, beta;
    Tensor<T> running_mean, running_var;  // batch kind only
    Tensor<T> batches_tracked;            // batch kind only, [1]
};

enum class Act { hardswish, relu, sigmoid };

namespace detail {

struct Dims3 {
    std::int64_t b, l, c;
    bool batched;
};

template <typename T>
Dims3 as3(const Tensor<T>& x, const char* op) {
    if (x.rank() == 3) return {x.dim(0), x.dim(1), x.dim(2), true};
    if (x.rank() == 2) return {1, x.dim(0), x.dim(1), false};
    throw UsageError(std::string(op) + ": expected [L,C] or [B,L,C], got " + shape_str(x.shape()));
}

inline std::vector<std::int64_t> like3(const Dims3& d, std::int64_t l, std::int64_t c) {
    if (d.batched) return {d.b, l, c};
    return {l, c};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Embedding: byte id -> learned 32-d dense row; gradient scatters into the
// rows actually used.

template <typename T>
Tensor<T> embedding_forward(const ByteBatch& bytes, const Tensor<T>& table) {
    if (table.rank() != 2) throw UsageError("embedding_forward: table must be [vocab, dim]");
    const std::int64_t vocab = table.dim(0), dim = table.dim(1);
    const std::int64_t B = bytes.batch, L = bytes.length;
    Tensor<T> out = Tensor<T>::zeros({B, L, dim});
    const T* tab = table.data().data();
    T* y = out.data().data();
    const std::uint8_t* ids = bytes.bytes.data();
    parallel_for(B, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t b = lo; b < hi; ++b)
            for (std::int64_t l = 0; l < L; ++l) {
                const T* row = tab + std::int64_t(ids[b * L + l]) * dim;
                T* dst = y + (b * L + l) * dim;
                for (std::int64_t e = 0; e < dim; ++e) dst[e] = row[e];
            }
    });
    auto ids_copy = std::make_shared<std::vector<std::uint8_t>>(bytes.bytes);
    detail::attach<T>(out, {table}, [tn = table.node(), ids_copy, B, L, dim, vocab](detail::Node<T>& self) {
        (void)vocab;
        if (!tn->requires_grad) return;
        tn->ensure_grad();
        const T* g = self.grad.data();
        T* tg = tn->grad.data();
        const std::uint8_t* ids = ids_copy->data();
        for (std::int64_t r = 0; r < B * L; ++r) {
            T* dst = tg + std::int64_t(ids[r]) * dim;
            const T* src = g + r * dim;
            for (std::int64_t e = 0; e < dim; ++e) dst[e] += src[e];
        }
    });
    return out;
}

// Integer-sequence overload (single sequence -> [L, dim]).
template <typename T>
Tensor<T> embedding_forward(const std::vector<int>& symbols, const Tensor<T>& table) {
    ByteBatch bb(1, std::int64_t(symbols.size()));
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (symbols[i] < 0 || symbols[i] > 255)
            throw UsageError("embedding_forward: symbol " + std::to_string(symbols[i]) + " outside [0,255]");
        bb.bytes[i] = std::uint8_t(symbols[i]);
    }
    Tensor<T> out3 = embedding_forward(bb, table);
    // re-shape [1,L,dim] -> [L,dim] in place
    out3.node()->shape = {std::int64_t(symbols.size()), table.dim(1)};
    return out3;
}

// ---------------------------------------------------------------------------
// Convolutions. Zero same-padding; output length = ceil(L/stride). Layouts:
// x [*,L,M] row-major channel-fastest, standard weight [K,M,N], depthwise
// weight [K,M], pointwise weight [M,N].

template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& x, const ConvLayerSpec& spec, const Tensor<T>& weight,
                         const Tensor<T>* bias = nullptr) {
    spec.validate();
    if (spec.kind != ConvKind::standard) throw UsageError("conv1d_forward: spec.kind must be standard");
    auto d = detail::as3(x, "conv1d_forward");
    const std::int64_t L = d.l, M = d.c, B = d.b;
    const std::int64_t K = spec.kernel, N = spec.out_channels, S = spec.stride;
    if (M != spec.in_channels)
        throw UsageError("conv1d_forward: input channels " + shape_str(x.shape()) + " do not match spec M=" +
                         std::to_string(spec.in_channels));
    if (weight.rank() != 3 || weight.dim(0) != K || weight.dim(1) != M || weight.dim(2) != N)
        throw UsageError("conv1d_forward: weight shape " + shape_str(weight.shape()) + " does not match spec [K,M,N]=[" +
                         std::to_string(K) + ", " + std::to_string(M) + ", " + std::to_string(N) + "]");
    if (bias && bias->numel() != N) throw UsageError("conv1d_forward: bias size must equal N");

    ConvLayerSpec s = spec;
    s.input_length = L;
    const std::int64_t Lo = s.output_length(), PL = s.pad_left();
    Tensor<T> out = Tensor<T>::zeros(detail::like3(d, Lo, N));

    const T* xp = x.data().data();
    const T* wp = weight.data().data();
    const T* bp = bias ? bias->data().data() : nullptr;
    T* yp = out.data().data();
    parallel_for(B, [&](std::int64_t blo, std::int64_t bhi) {
        for (std::int64_t b = blo; b < bhi; ++b) {
            const T* xb = xp + b * L * M;
            T* yb = yp + b * Lo * N;
            for (std::int64_t o = 0; o < Lo; ++o) {
                T* yrow = yb + o * N;
                if (bp)
                    for (std::int64_t n = 0; n < N; ++n) yrow[n] = bp[n];
                for (std::int64_t t = 0; t < K; ++t) {
                    std::int64_t i = o * S + t - PL;
                    if (i < 0 || i >= L) continue;
                    const T* xrow = xb + i * M;
                    const T* wt = wp + t * M * N;
                    for (std::int64_t m = 0; m < M; ++m) {
                        T xv = xrow[m];
                        const T* wrow = wt + m * N;
                        for (std::int64_t n = 0; n < N; ++n) yrow[n] += xv * wrow[n];
                    }
                }
            }
        }
    });

    std::vector<Tensor<T>> ins{x, weight};
    if (bias) ins.push_back(*bias);
    detail::attach<T>(out, ins,
                      [xn = x.node(), wn = weight.node(), bn = bias ? bias->node() : nullptr, B, L, M, N, K, S,
                       PL, Lo](detail::Node<T>& self) {
                          const T* g = self.grad.data();
                          const T* xp = xn->data.data();
                          const T* wp = wn->data.data();
                          if (xn->requires_grad) {
                              xn->ensure_grad();
                              T* xg = xn->grad.data();
                              parallel_for(B, [&](std::int64_t blo, std::int64_t bhi) {
                                  for (std::int64_t b = blo; b < bhi; ++b) {
                                      const T* gb = g + b * Lo * N;
                                      T* xgb = xg + b * L * M;
                                      for (std::int64_t o = 0; o < Lo; ++o) {
                                          const T* grow = gb + o * N;
                                          for (std::int64_t t = 0; t < K; ++t) {
                                              std::int64_t i = o * S + t - PL;
                                              if (i < 0 || i >= L) continue;
                                              T* xgrow = xgb + i * M;
                                              const T* wt = wp + t * M * N;
                                              for (std::int64_t m = 0; m < M; ++m) {
                                                  const T* wrow = wt + m * N;
                                                  T acc = 0;
                                                  for (std::int64_t n = 0; n < N; ++n) acc += grow[n] * wrow[n];
                                                  xgrow[m] += acc;
                                              }
                                          }
                                      }
                                  }
                              });
                          }
                          if (wn->requires_grad) {
                              wn->ensure_grad();
                              T* wg = wn->grad.data();
                              for (std::int64_t b = 0; b < B; ++b) {
                                  const T* gb = g + b * Lo * N;
                                  const T* xb = xp + b * L * M;
                                  for (std::int64_t o = 0; o < Lo; ++o) {
                                      const T* grow = gb + o * N;
                                      for (std::int64_t t = 0; t < K; ++t) {
                                          std::int64_t i = o * S + t - PL;
                                          if (i < 0 || i >= L) continue;
                                          const T* xrow = xb + i * M;
                                          T* wt = wg + t * M * N;
                                          for (std::int64_t m = 0; m < M; ++m) {
                                              T xv = xrow[m];
                                              T* wrow = wt + m * N;
                                              for (std::int64_t n = 0; n < N; ++n) wrow[n] += xv * grow[n];
                                          }
                                      }
                                  }
                              }
                          }
                          if (bn && bn->requires_grad) {
                              bn->ensure_grad();
                              T* bg = bn->grad.data();
                              for (std::int64_t r = 0; r < B * Lo; ++r) {
                                  const T* grow = g + r * N;
                                  for (std::int64_t n = 0; n < N; ++n) bg[n] += grow[n];
                              }
                          }
                      });
    return out;
}

// Per-channel filters; channels never mix.
template <typename T>
Tensor<T> depthwise_conv1d_forward(const Tensor<T>& x, const ConvLayerSpec& spec, const Tensor<T>& weight,
                                   const Tensor<T>* bias = nullptr) {
    spec.validate();
    if (spec.kind != ConvKind::depthwise) throw UsageError("depthwise_conv1d_forward: spec.kind must be depthwise");
    auto d = detail::as3(x, "depthwise_conv1d_forward");
    const std::int64_t L = d.l, M = d.c, B = d.b, K = spec.kernel, S = spec.stride;
    if (M != spec.in_channels)
        throw UsageError("depthwise_conv1d_forward: input channels " + shape_str(x.shape()) +
                         " do not match spec M=" + std::to_string(spec.in_channels));
    if (weight.rank() != 2 || weight.dim(0) != K || weight.dim(1) != M)
        throw UsageError("depthwise_conv1d_forward: weight shape " + shape_str(weight.shape()) +
                         " does not match [K,M]=[" + std::to_string(K) + ", " + std::to_string(M) + "]");
    if (bias && bias->numel() != M) throw UsageError("depthwise_conv1d_forward: bias size must equal M");

    ConvLayerSpec s = spec;
    s.input_length = L;
    const std::int64_t Lo = s.output_length(), PL = s.pad_left();
    Tensor<T> out = Tensor<T>::zeros(detail::like3(d, Lo, M));
    const T* xp = x.data().data();
    const T* wp = weight.data().data();
    const T* bp = bias ? bias->data().data() : nullptr;
    T* yp = out.data().data();
    parallel_for(B, [&](std::int64_t blo, std::int64_t bhi) {
        for (std::int64_t b = blo; b < bhi; ++b) {
            const T* xb = xp + b * L * M;
            T* yb = yp + b * Lo * M;
            for (std::int64_t o = 0; o < Lo; ++o) {
                T* yrow = yb + o * M;
                if (bp)
                    for (std::int64_t c = 0; c < M; ++c) yrow[c] = bp[c];
                for (std::int64_t t = 0; t < K; ++t) {
                    std::int64_t i = o * S + t - PL;
                    if (i < 0 || i >= L) continue;
                    const T* xrow = xb + i * M;
                    const T* wrow = wp + t * M;
                    for (std::int64_t c = 0; c < M; ++c) yrow[c] += xrow[c] * wrow[c];
                }
            }
        }
    });

    std::vector<Tensor<T>> ins{x, weight};
    if (bias) ins.push_back(*bias);
    detail::attach<T>(out, ins,
                      [xn = x.node(), wn = weight.node(), bn = bias ? bias->node() : nullptr, B, L, M, K, S, PL,
                       Lo](detail::Node<T>& self) {
                          const T* g = self.grad.data();
                          const T* xp = xn->data.data();
                          const T* wp = wn->data.data();
                          if (xn->requires_grad) {
                              xn->ensure_grad();
                              T* xg = xn->grad.data();
                              parallel_for(B, [&](std::int64_t blo, std::int64_t bhi) {
                                  for (std::int64_t b = blo; b < bhi; ++b)
                                      for (std::int64_t o = 0; o < Lo; ++o) {
                                          const T* grow = g + (b * Lo + o) * M;
                                          for (std::int64_t t = 0; t < K; ++t) {
                                              std::int64_t i = o * S + t - PL;
                                              if (i < 0 || i >= L) continue;
                                              T* xgrow = xg + (b * L + i) * M;
                                              const T* wrow = wp + t * M;
                                              for (std::int64_t c = 0; c < M; ++c) xgrow[c] += grow[c] * wrow[c];
                                          }
                                      }
                              });
                          }
                          if (wn->requires_grad) {
                              wn->ensure_grad();
                              T* wg = wn->grad.data();
                              for (std::int64_t b = 0; b < B; ++b)
                                  for (std::int64_t o = 0; o < Lo; ++o) {
                                      const T* grow = g + (b * Lo + o) * M;
                                      for (std::int64_t t = 0; t < K; ++t) {
                                          std::int64_t i = o * S + t - PL;
                                          if (i < 0 || i >= L) continue;
                                          const T* xrow = xp + (b * L + i) * M;
                                          T* wrow = wg + t * M;
                                          for (std::int64_t c = 0; c < M; ++c) wrow[c] += xrow[c] * grow[c];
                                      }
                                  }
                          }
                          if (bn && bn->requires_grad) {
                              bn->ensure_grad();
                              T* bg = bn->grad.data();
                              for (std::int64_t r = 0; r < B * Lo; ++r) {
                                  const T* grow = g + r * M;
                                  for (std::int64_t c = 0; c < M; ++c) bg[c] += grow[c];
                              }
                          }
                      });
    return out;
}

// 1x1 channel-mixing map; spatial positions independent.
template <typename T>
Tensor<T> pointwise_conv1d_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias = nullptr) {
    auto d = detail::as3(x, "pointwise_conv1d_forward");
    const std::int64_t L = d.l, M = d.c, B = d.b;
    if (weight.rank() != 2 || weight.dim(0) != M)
        throw UsageError("pointwise_conv1d_forward: weight shape " + shape_str(weight.shape()) +
                         " does not match input channels " + std::to_string(M));
    const std::int64_t N = weight.dim(1);
    if (bias && bias->numel() != N) throw UsageError("pointwise_conv1d_forward: bias size must equal N");

    Tensor<T> out = Tensor<T>::zeros(detail::like3(d, L, N));
    const T* xp = x.data().data();
    const T* wp = weight.data().data();
    const T* bp = bias ? bias->data().data() : nullptr;
    T* yp = out.data().data();
    parallel_for(B, [&](std::int64_t blo, std::int64_t bhi) {
        for (std::int64_t b = blo; b < bhi; ++b)
            for (std::int64_t o = 0; o < L; ++o) {
                const T* xrow = xp + (b * L + o) * M;
                T* yrow = yp + (b * L + o) * N;
                if (bp)
                    for (std::int64_t n = 0; n < N; ++n) yrow[n] = bp[n];
                for (std::int64_t m = 0; m < M; ++m) {
                    T xv = xrow[m];
                    const T* wrow = wp + m * N;
                    for (std::int64_t n = 0; n < N; ++n) yrow[n] += xv * wrow[n];
                }
            }
    });

    std::vector<Tensor<T>> ins{x, weight};
    if (bias) ins.push_back(*bias);
    detail::attach<T>(out, ins,
                      [xn = x.node(), wn = weight.node(), bn = bias ? bias->node() : nullptr, B, L, M,
                       N](detail::Node<T>& self) {
                          const T* g = self.grad.data();
                          const T* xp = xn->data.data();
                          const T* wp = wn->data.data();
                          if (xn->requires_grad) {
                              xn->ensure_grad();
                              T* xg = xn->grad.data();
                              parallel_for(B, [&](std::int64_t blo, std::int64_t bhi) {
                                  for (std::int64_t b = blo; b < bhi; ++b)
                                      for (std::int64_t o = 0; o < L; ++o) {
                                          const T* grow = g + (b * L + o) * N;
                                          T* xgrow = xg + (b * L + o) * M;
                                          for (std::int64_t m = 0; m < M; ++m) {
                                              const T* wrow = wp + m * N;
                                              T acc = 0;
                                              for (std::int64_t n = 0; n < N; ++n) acc += grow[n] * wrow[n];
                                              xgrow[m] += acc;
                                          }
                                      }
                              });
                          }
                          if (wn->requires_grad) {
                              wn->ensure_grad();
                              T* wg = wn->grad.data();
                              for (std::int64_t r = 0; r < B * L; ++r) {
                                  const T* xrow = xp + r * M;
                                  const T* grow = g + r * N;
                                  for (std::int64_t m = 0; m < M; ++m) {
                                      T xv = xrow[m];
                                      T* wrow = wg + m * N;
                                      for (std::int64_t n = 0; n < N; ++n) wrow[n] += xv * grow[n];
                                  }
                              }
                          }
                          if (bn && bn->requires_grad) {
                              bn->ensure_grad();
                              T* bg = bn->grad.data();
                              for (std::int64_t r = 0; r < B * L; ++r) {
                                  const T* grow = g + r * N;
                                  for (std::int64_t n = 0; n < N; ++n) bg[n] += grow[n];
                              }
                          }
                      });
    return out;
}

// ---------------------------------------------------------------------------
// Activations. hardswish: 0 for x<=-3, x for x>=+3, x(x+3)/6 otherwise.

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Act kind) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const T* xp = x.data().data();
    T* yp = out.data().data();
    const std::int64_t n = x.numel();
    switch (kind) {
        case Act::hardswish:
            for (std::int64_t i = 0; i < n; ++i) {
                T v = xp[i];
                yp[i] = v <= T(-3) ? T(0) : (v >= T(3) ? v : v * (v + T(3)) / T(6));
            }
            break;
        case Act::relu:
            for (std::int64_t i = 0; i < n; ++i) yp[i] = xp[i] > T(0) ? xp[i] : T(0);
            break;
        case Act::sigmoid:
            for (std::int64_t i = 0; i < n; ++i) yp[i] = T(1) / (T(1) + T(std::exp(-double(xp[i]))));
            break;
    }
    std::vector<T> saved;
    if (kind == Act::sigmoid) saved.assign(yp, yp + n);
    detail::attach<T>(out, {x}, [xn = x.node(), kind, saved = std::move(saved), n](detail::Node<T>& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const T* g = self.grad.data();
        const T* xp = xn->data.data();
        T* xg = xn->grad.data();
        switch (kind) {
            case Act::hardswish:
                for (std::int64_t i = 0; i < n; ++i) {
                    T v = xp[i];
                    T d = v <= T(-3) ? T(0) : (v >= T(3) ? T(1) : (T(2) * v + T(3)) / T(6));
                    xg[i] += g[i] * d;
                }
                break;
            case Act::relu:
                for (std::int64_t i = 0; i < n; ++i) xg[i] += xp[i] > T(0) ? g[i] : T(0);
                break;
            case Act::sigmoid:
                for (std::int64_t i = 0; i < n; ++i) xg[i] += g[i] * saved[i] * (T(1) - saved[i]);
                break;
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Normalization. Batch kind normalizes per channel over batch x length with
// batch statistics (train) or running statistics (eval). Group kind
// normalizes per sample per channel group x length; identical in both modes.

template <typename T>
Tensor<T> normalize(const Tensor<T>& x, const NormSpec& spec, NormState<T>& state, Mode mode) {
    spec.validate();
    auto d = detail::as3(x, "normalize");
    const std::int64_t B = d.b, L = d.l, C = d.c;
    if (C != spec.channels)
        throw UsageError("normalize: input channels " + std::to_string(C) + " do not match spec channels " +
                         std::to_string(spec.channels));
    if (state.gamma.numel() != C || state.beta.numel() != C)
        throw UsageError("normalize: affine parameter size must equal channels");

    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const T* xp = x.data().data();
    T* yp = out.data().data();
    const T* gm = state.gamma.data().data();
    const T* bt = state.beta.data().data();
    const T eps = T(spec.epsilon);

    if (spec.kind == NormKind::batch) {
        if (!d.batched || x.rank() != 3) throw UsageError("normalize: batch kind requires a [B,L,C] tensor");
        if (mode == Mode::train && B < 2) throw UsageError("normalize: batch kind in train mode requires batch size >= 2");
        if (state.running_mean.numel() != C || state.running_var.numel() != C)
            throw UsageError("normalize: running statistics size must equal channels");

        std::vector<T> mu(std::size_t(C), T(0)), inv_std(std::size_t(C), T(0));
        if (mode == Mode::train) {
            const double n = double(B) * double(L);
            std::vector<double> sum(std::size_t(C), 0.0), sq(std::size_t(C), 0.0);
            for (std::int64_t r = 0; r < B * L; ++r) {
                const T* row = xp + r * C;
                for (std::int64_t c = 0; c < C; ++c) sum[c] += double(row[c]);
            }
            for (std::int64_t c = 0; c < C; ++c) mu[c] = T(sum[c] / n);
            for (std::int64_t r = 0; r < B * L; ++r) {
                const T* row = xp + r * C;
                for (std::int64_t c = 0; c < C; ++c) {
                    double dv = double(row[c]) - double(mu[c]);
                    sq[c] += dv * dv;
                }
            }
            T* rm = state.running_mean.data().data();
            T* rv = state.running_var.data().data();
            if (state.batches_tracked.numel() != 1)
                throw UsageError("normalize: batch kind requires a batches_tracked counter");
            T& tracked = state.batches_tracked.data()[0];
            const T mom = tracked == T(0) ? T(1) : T(spec.momentum);
            for (std::int64_t c = 0; c < C; ++c) {
                T var = T(sq[c] / n);
                inv_std[c] = T(1) / T(std::sqrt(double(var) + double(eps)));
                rm[c] = (T(1) - mom) * rm[c] + mom * mu[c];
                rv[c] = (T(1) - mom) * rv[c] + mom * var;
            }
            tracked += T(1);
        } else {
            const T* rm = state.running_mean.data().data();
            const T* rv = state.running_var.data().data();
            for (std::int64_t c = 0; c < C; ++c) {
                mu[c] = rm[c];
                inv_std[c] = T(1) / T(std::sqrt(double(rv[c]) + double(eps)));
            }
        }
        parallel_for(B, [&](std::int64_t blo, std::int64_t bhi) {
            for (std::int64_t b = blo; b < bhi; ++b)
                for (std::int64_t l = 0; l < L; ++l) {
                    const T* row = xp + (b * L + l) * C;
                    T* yrow = yp + (b * L + l) * C;
                    for (std::int64_t c = 0; c < C; ++c) yrow[c] = gm[c] * (row[c] - mu[c]) * inv_std[c] + bt[c];
                }
        });

        bool train_stats = (mode == Mode::train);
        detail::attach<T>(out, {x, state.gamma, state.beta},
                          [xn = x.node(), gn = state.gamma.node(), bn = state.beta.node(), mu, inv_std, B, L, C,
                           train_stats](detail::Node<T>& self) {
                              const T* g = self.grad.data();
                              const T* xp = xn->data.data();
                              const T* gm = gn->data.data();
                              const std::int64_t R = B * L;
                              // per-channel reductions
                              std::vector<double> sum_g(std::size_t(C), 0.0), sum_gx(std::size_t(C), 0.0);
                              for (std::int64_t r = 0; r < R; ++r) {
                                  const T* grow = g + r * C;
                                  const T* xrow = xp + r * C;
                                  for (std::int64_t c = 0; c < C; ++c) {
                                      double xhat = (double(xrow[c]) - double(mu[c])) * double(inv_std[c]);
                                      sum_g[c] += double(grow[c]);
                                      sum_gx[c] += double(grow[c]) * xhat;
                                  }
                              }
                              if (gn->requires_grad) {
                                  gn->ensure_grad();
                                  for (std::int64_t c = 0; c < C; ++c) gn->grad[c] += T(sum_gx[c]);
                              }
                              if (bn->requires_grad) {
                                  bn->ensure_grad();
                                  for (std::int64_t c = 0; c < C; ++c) bn->grad[c] += T(sum_g[c]);
                              }
                              if (!xn->requires_grad) return;
                              xn->ensure_grad();
                              T* xg = xn->grad.data();
                              if (!train_stats) {
                                  for (std::int64_t r = 0; r < R; ++r) {
                                      const T* grow = g + r * C;
                                      T* xgrow = xg + r * C;
                                      for (std::int64_t c = 0; c < C; ++c)
                                          xgrow[c] += grow[c] * gm[c] * inv_std[c];
                                  }
                                  return;
                              }
                              const double n = double(R);
                              for (std::int64_t r = 0; r < R; ++r) {
                                  const T* grow = g + r * C;
                                  const T* xrow = xp + r * C;
                                  T* xgrow = xg + r * C;
                                  for (std::int64_t c = 0; c < C; ++c) {
                                      double xhat = (double(xrow[c]) - double(mu[c])) * double(inv_std[c]);
                                      double dxhat = double(grow[c]) * double(gm[c]);
                                      double dx = double(inv_std[c]) *
                                                  (dxhat - sum_g[c] * double(gm[c]) / n - xhat * sum_gx[c] * double(gm[c]) / n);
                                      xgrow[c] += T(dx);
                                  }
                              }
                          });
        return out;
    }

    // group kind
    const std::int64_t G = spec.groups, CG = C / G;
    std::vector<T> mu(std::size_t(B * G), T(0)), inv_std(std::size_t(B * G), T(0));
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t g = 0; g < G; ++g) {
            double sum = 0.0, sq = 0.0;
            const double n = double(L) * double(CG);
            for (std::int64_t l = 0; l < L; ++l) {
                const T* row = xp + (b * L + l) * C + g * CG;
                for (std::int64_t c = 0; c < CG; ++c) sum += double(row[c]);
            }
            double m = sum / n;
            for (std::int64_t l = 0; l < L; ++l) {
                const T* row = xp + (b * L + l) * C + g * CG;
                for (std::int64_t c = 0; c < CG; ++c) {
                    double dv = double(row[c]) - m;
                    sq += dv * dv;
                }
            }
            mu[std::size_t(b * G + g)] = T(m);
            inv_std[std::size_t(b * G + g)] = T(1.0 / std::sqrt(sq / n + double(eps)));
        }
    parallel_for(B, [&](std::int64_t blo, std::int64_t bhi) {
        for (std::int64_t b = blo; b < bhi; ++b)
            for (std::int64_t l = 0; l < L; ++l) {
                const T* row = xp + (b * L + l) * C;
                T* yrow = yp + (b * L + l) * C;
                for (std::int64_t c = 0; c < C; ++c) {
                    std::int64_t gi = b * G + c / CG;
                    yrow[c] = gm[c] * (row[c] - mu[std::size_t(gi)]) * inv_std[std::size_t(gi)] + bt[c];
                }
            }
    });

    detail::attach<T>(out, {x, state.gamma, state.beta},
                      [xn = x.node(), gn = state.gamma.node(), bn = state.beta.node(), mu, inv_std, B, L, C, G,
                       CG](detail::Node<T>& self) {
                          const T* g = self.grad.data();
                          const T* xp = xn->data.data();
                          const T* gm = gn->data.data();
                          if (gn->requires_grad || bn->requires_grad) {
                              std::vector<double> dgamma(std::size_t(C), 0.0), dbeta(std::size_t(C), 0.0);
                              for (std::int64_t b = 0; b < B; ++b)
                                  for (std::int64_t l = 0; l < L; ++l) {
                                      const T* grow = g + (b * L + l) * C;
                                      const T* xrow = xp + (b * L + l) * C;
                                      for (std::int64_t c = 0; c < C; ++c) {
                                          std::int64_t gi = b * G + c / CG;
                                          double xhat = (double(xrow[c]) - double(mu[std::size_t(gi)])) *
                                                        double(inv_std[std::size_t(gi)]);
                                          dgamma[c] += double(grow[c]) * xhat;
                                          dbeta[c] += double(grow[c]);
                                      }
                                  }
                              if (gn->requires_grad) {
                                  gn->ensure_grad();
                                  for (std::int64_t c = 0; c < C; ++c) gn->grad[c] += T(dgamma[c]);
                              }
                              if (bn->requires_grad) {
                                  bn->ensure_grad();
                                  for (std::int64_t c = 0; c < C; ++c) bn->grad[c] += T(dbeta[c]);
                              }
                          }
                          if (!xn->requires_grad) return;
                          xn->ensure_grad();
                          T* xg = xn->grad.data();
                          const double n = double(L) * double(CG);
                          for (std::int64_t b = 0; b < B; ++b)
                              for (std::int64_t gidx = 0; gidx < G; ++gidx) {
                                  std::int64_t gi = b * G + gidx;
                                  double m = double(mu[std::size_t(gi)]), is = double(inv_std[std::size_t(gi)]);
                                  double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                                  for (std::int64_t l = 0; l < L; ++l) {
                                      const T* grow = g + (b * L + l) * C + gidx * CG;
                                      const T* xrow = xp + (b * L + l) * C + gidx * CG;
                                      for (std::int64_t c = 0; c < CG; ++c) {
                                          double dxhat = double(grow[c]) * double(gm[gidx * CG + c]);
                                          double xhat = (double(xrow[c]) - m) * is;
                                          sum_dxhat += dxhat;
                                          sum_dxhat_xhat += dxhat * xhat;
                                      }
                                  }
                                  for (std::int64_t l = 0; l < L; ++l) {
                                      const T* grow = g + (b * L + l) * C + gidx * CG;
                                      const T* xrow = xp + (b * L + l) * C + gidx * CG;
                                      T* xgrow = xg + (b * L + l) * C + gidx * CG;
                                      for (std::int64_t c = 0; c < CG; ++c) {
                                          double dxhat = double(grow[c]) * double(gm[gidx * CG + c]);
                                          double xhat = (double(xrow[c]) - m) * is;
                                          xgrow[c] += T(is * (dxhat - sum_dxhat / n - xhat * sum_dxhat_xhat / n));
                                      }
                                  }
                              }
                      });
    return out;
}

// ---------------------------------------------------------------------------
// Pooling

// Window maxima per channel; trailing remainder dropped; gradient routes to
// the first maximal index of each window.
template <typename T>
Tensor<T> maxpool1d(const Tensor<T>& x, std::int64_t window = 4, std::int64_t stride = 4) {
    auto d = detail::as3(x, "maxpool1d");
    const std::int64_t B = d.b, L = d.l, C = d.c;
    if (window <= 0 || stride <= 0) throw UsageError("maxpool1d: window and stride must be positive");
    if (L < window)
        throw UsageError("maxpool1d: input length " + std::to_string(L) + " shorter than window " +
                         std::to_string(window));
    const std::int64_t Lo = (L - window) / stride + 1;
    Tensor<T> out = Tensor<T>::zeros(detail::like3(d, Lo, C));
    auto argmax = std::make_shared<std::vector<std::int32_t>>(std::size_t(B * Lo * C));
    const T* xp = x.data().data();
    T* yp = out.data().data();
    std::int32_t* am = argmax->data();
    parallel_for(B, [&](std::int64_t blo, std::int64_t bhi) {
        for (std::int64_t b = blo; b < bhi; ++b)
            for (std::int64_t o = 0; o < Lo; ++o) {
                const std::int64_t base = o * stride;
                T* yrow = yp + (b * Lo + o) * C;
                std::int32_t* arow = am + (b * Lo + o) * C;
                const T* x0 = xp + (b * L + base) * C;
                for (std::int64_t c = 0; c < C; ++c) {
                    yrow[c] = x0[c];
                    arow[c] = std::int32_t(base);
                }
                for (std::int64_t w = 1; w < window; ++w) {
                    const T* xw = xp + (b * L + base + w) * C;
                    for (std::int64_t c = 0; c < C; ++c)
                        if (xw[c] > yrow[c]) {
                            yrow[c] = xw[c];
                            arow[c] = std::int32_t(base + w);
                        }
                }
            }
    });
    detail::attach<T>(out, {x}, [xn = x.node(), argmax, B, L, Lo, C](detail::Node<T>& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const T* g = self.grad.data();
        T* xg = xn->grad.data();
        const std::int32_t* am = argmax->data();
        for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t o = 0; o < Lo; ++o) {
                const T* grow = g + (b * Lo + o) * C;
                const std::int32_t* arow = am + (b * Lo + o) * C;
                for (std::int64_t c = 0; c < C; ++c) xg[(b * L + arow[c]) * C + c] += grow[c];
            }
    });
    return out;
}

// Arithmetic mean over the spatial dimension: [B,L,C] -> [B,C], [L,C] -> [C].
template <typename T>
Tensor<T> global_avgpool(const Tensor<T>& x) {
    auto d = detail::as3(x, "global_avgpool");
    const std::int64_t B = d.b, L = d.l, C = d.c;
    std::vector<std::int64_t> oshape = d.batched ? std::vector<std::int64_t>{B, C} : std::vector<std::int64_t>{C};
    Tensor<T> out = Tensor<T>::zeros(oshape);
    const T* xp = x.data().data();
    T* yp = out.data().data();
    for (std::int64_t b = 0; b < B; ++b) {
        std::vector<double> acc(std::size_t(C), 0.0);
        for (std::int64_t l = 0; l < L; ++l) {
            const T* row = xp + (b * L + l) * C;
            for (std::int64_t c = 0; c < C; ++c) acc[std::size_t(c)] += double(row[c]);
        }
        for (std::int64_t c = 0; c < C; ++c) yp[b * C + c] = T(acc[std::size_t(c)] / double(L));
    }
    detail::attach<T>(out, {x}, [xn = x.node(), B, L, C](detail::Node<T>& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const T* g = self.grad.data();
        T* xg = xn->grad.data();
        for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t l = 0; l < L; ++l) {
                T* xgrow = xg + (b * L + l) * C;
                const T* grow = g + b * C;
                for (std::int64_t c = 0; c < C; ++c) xgrow[c] += grow[c] / T(L);
            }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Fully connected map over the trailing dimension: [*, Cin] -> [*, Cout].

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias = nullptr) {
    if (weight.rank() != 2) throw UsageError("linear: weight must be [Cin, Cout]");
    const std::int64_t Cin = weight.dim(0), Cout = weight.dim(1);
    if (x.rank() < 1 || x.shape().back() != Cin)
        throw UsageError("linear: input shape " + shape_str(x.shape()) + " does not end in Cin=" + std::to_string(Cin));
    if (bias && bias->numel() != Cout) throw UsageError("linear: bias size must equal Cout");
    const std::int64_t R = x.numel() / Cin;
    std::vector<std::int64_t> oshape(x.shape().begin(), x.shape().end());
    oshape.back() = Cout;
    Tensor<T> out = Tensor<T>::zeros(oshape);
    const T* xp = x.data().data();
    const T* wp = weight.data().data();
    const T* bp = bias ? bias->data().data() : nullptr;
    T* yp = out.data().data();
    for (std::int64_t r = 0; r < R; ++r) {
        const T* xrow = xp + r * Cin;
        T* yrow = yp + r * Cout;
        if (bp)
            for (std::int64_t n = 0; n < Cout; ++n) yrow[n] = bp[n];
        for (std::int64_t m = 0; m < Cin; ++m) {
            T xv = xrow[m];
            const T* wrow = wp + m * Cout;
            for (std::int64_t n = 0; n < Cout; ++n) yrow[n] += xv * wrow[n];
        }
    }
    std::vector<Tensor<T>> ins{x, weight};
    if (bias) ins.push_back(*bias);
    detail::attach<T>(out, ins,
                      [xn = x.node(), wn = weight.node(), bn = bias ? bias->node() : nullptr, R, Cin,
                       Cout](detail::Node<T>& self) {
                          const T* g = self.grad.data();
                          const T* xp = xn->data.data();
                          const T* wp = wn->data.data();
                          if (xn->requires_grad) {
                              xn->ensure_grad();
                              T* xg = xn->grad.data();
                              for (std::int64_t r = 0; r < R; ++r) {
                                  const T* grow = g + r * Cout;
                                  T* xgrow = xg + r * Cin;
                                  for (std::int64_t m = 0; m < Cin; ++m) {
                                      const T* wrow = wp + m * Cout;
                                      T acc = 0;
                                      for (std::int64_t n = 0; n < Cout; ++n) acc += grow[n] * wrow[n];
                                      xgrow[m] += acc;
                                  }
                              }
                          }
                          if (wn->requires_grad) {
                              wn->ensure_grad();
                              T* wg = wn->grad.data();
                              for (std::int64_t r = 0; r < R; ++r) {
                                  const T* grow = g + r * Cout;
                                  const T* xrow = xp + r * Cin;
                                  for (std::int64_t m = 0; m < Cin; ++m) {
                                      T xv = xrow[m];
                                      T* wrow = wg + m * Cout;
                                      for (std::int64_t n = 0; n < Cout; ++n) wrow[n] += xv * grow[n];
                                  }
                              }
                          }
                          if (bn && bn->requires_grad) {
                              bn->ensure_grad();
                              T* bg = bn->grad.data();
                              for (std::int64_t r = 0; r < R; ++r) {
                                  const T* grow = g + r * Cout;
                                  for (std::int64_t n = 0; n < Cout; ++n) bg[n] += grow[n];
                              }
                          }
                      });
    return out;
}

// out[.,l,c] = x[.,l,c] * gate[.,c]
template <typename T>
Tensor<T> channel_scale(const Tensor<T>& x, const Tensor<T>& gate) {
    auto d = detail::as3(x, "channel_scale");
    const std::int64_t B = d.b, L = d.l, C = d.c;
    if (gate.numel() != B * C)
        throw UsageError("channel_scale: gate shape " + shape_str(gate.shape()) + " does not match [B,C]");
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const T* xp = x.data().data();
    const T* gp = gate.data().data();
    T* yp = out.data().data();
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t l = 0; l < L; ++l) {
            const T* xrow = xp + (b * L + l) * C;
            const T* grow = gp + b * C;
            T* yrow = yp + (b * L + l) * C;
            for (std::int64_t c = 0; c < C; ++c) yrow[c] = xrow[c] * grow[c];
        }
    detail::attach<T>(out, {x, gate}, [xn = x.node(), gn = gate.node(), B, L, C](detail::Node<T>& self) {
        const T* g = self.grad.data();
        const T* xp = xn->data.data();
        const T* gp = gn->data.data();
        if (xn->requires_grad) {
            xn->ensure_grad();
            T* xg = xn->grad.data();
            for (std::int64_t b = 0; b < B; ++b)
                for (std::int64_t l = 0; l < L; ++l) {
                    const T* grow = g + (b * L + l) * C;
                    const T* gaterow = gp + b * C;
                    T* xgrow = xg + (b * L + l) * C;
                    for (std::int64_t c = 0; c < C; ++c) xgrow[c] += grow[c] * gaterow[c];
                }
        }
        if (gn->requires_grad) {
            gn->ensure_grad();
            T* gg = gn->grad.data();
            for (std::int64_t b = 0; b < B; ++b)
                for (std::int64_t l = 0; l < L; ++l) {
                    const T* grow = g + (b * L + l) * C;
                    const T* xrow = xp + (b * L + l) * C;
                    for (std::int64_t c = 0; c < C; ++c) gg[b * C + c] += grow[c] * xrow[c];
                }
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Squeeze-and-excitation: global descriptor -> two FC layers -> sigmoid gate
// multiplied back onto the feature maps.

template <typename T>
struct SEParams {
    Tensor<T> fc1_weight, fc1_bias;  // C -> C/r
    Tensor<T> fc2_weight, fc2_bias;  // C/r -> C
};

template <typename T>
Tensor<T> se_block(const Tensor<T>& x, const SEParams<T>& p, std::int64_t reduction) {
    auto d = detail::as3(x, "se_block");
    const std::int64_t C = d.c;
    if (reduction <= 0 || C % reduction != 0)
        throw UsageError("se_block: reduction " + std::to_string(reduction) + " must divide channels " +
                         std::to_string(C));
    const std::int64_t H = C / reduction;
    if (p.fc1_weight.dim(0) != C || p.fc1_weight.dim(1) != H || p.fc2_weight.dim(0) != H || p.fc2_weight.dim(1) != C)
        throw UsageError("se_block: FC parameter shapes do not match channels/reduction");
    Tensor<T> squeeze = global_avgpool(x);
    Tensor<T> hidden = activation(linear(squeeze, p.fc1_weight, &p.fc1_bias), Act::relu);
    Tensor<T> gate = activation(linear(hidden, p.fc2_weight, &p.fc2_bias), Act::sigmoid);
    return channel_scale(x, gate);
}

// ---------------------------------------------------------------------------
// Inverted dropout; identity in eval mode.

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, Mode mode, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw UsageError("dropout: p must lie in [0,1), got " + std::to_string(p));
    if (mode == Mode::eval || p == 0.0) {
        Tensor<T> out = Tensor<T>::zeros(x.shape());
        std::copy(x.data().begin(), x.data().end(), out.data().begin());
        detail::attach<T>(out, {x}, [xn = x.node()](detail::Node<T>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
        });
        return out;
    }
    const std::int64_t n = x.numel();
    auto mask = std::make_shared<std::vector<std::uint8_t>>(std::size_t(n));
    const T scale = T(1.0 / (1.0 - p));
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const T* xp = x.data().data();
    T* yp = out.data().data();
    for (std::int64_t i = 0; i < n; ++i) {
        bool keep = rng.next_double() >= p;
        (*mask)[std::size_t(i)] = keep ? 1 : 0;
        yp[i] = keep ? xp[i] * scale : T(0);
    }
    detail::attach<T>(out, {x}, [xn = x.node(), mask, scale, n](detail::Node<T>& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const T* g = self.grad.data();
        T* xg = xn->grad.data();
        for (std::int64_t i = 0; i < n; ++i)
            if ((*mask)[std::size_t(i)]) xg[i] += g[i] * scale;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy over [B,K] logits; loss is mean NLL, probs row-sums
// are 1. Stable log-sum-exp.

template <typename T>
struct SoftmaxLoss {
    Tensor<T> loss;   // scalar, differentiable
    Tensor<T> probs;  // [B,K], detached
};

template <typename T>
SoftmaxLoss<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) throw UsageError("softmax_cross_entropy: logits must be [B,K]");
    const std::int64_t B = logits.dim(0), K = logits.dim(1);
    if (std::int64_t(labels.size()) != B)
        throw UsageError("softmax_cross_entropy: expected " + std::to_string(B) + " labels, got " +
                         std::to_string(labels.size()));
    for (int y : labels)
        if (y < 0 || y >= K)
            throw UsageError("softmax_cross_entropy: label " + std::to_string(y) + " outside [0," + std::to_string(K) +
                             ")");
    Tensor<T> probs = Tensor<T>::zeros({B, K});
    const T* lp = logits.data().data();
    T* pp = probs.data().data();
    double nll = 0.0;
    for (std::int64_t b = 0; b < B; ++b) {
        const T* row = lp + b * K;
        T* prow = pp + b * K;
        double m = double(row[0]);
        for (std::int64_t k = 1; k < K; ++k) m = std::max(m, double(row[k]));
        double s = 0.0;
        for (std::int64_t k = 0; k < K; ++k) {
            double e = std::exp(double(row[k]) - m);
            prow[k] = T(e);
            s += e;
        }
        for (std::int64_t k = 0; k < K; ++k) prow[k] = T(double(prow[k]) / s);
        nll -= (double(row[labels[std::size_t(b)]]) - m - std::log(s));
    }
    Tensor<T> loss = Tensor<T>::scalar(T(nll / double(B)));
    auto probs_copy = std::make_shared<std::vector<T>>(probs.data().begin(), probs.data().end());
    auto labels_copy = std::make_shared<std::vector<int>>(labels);
    detail::attach<T>(loss, {logits}, [ln = logits.node(), probs_copy, labels_copy, B, K](detail::Node<T>& self) {
        if (!ln->requires_grad) return;
        ln->ensure_grad();
        const T up = self.grad[0];
        T* lg = ln->grad.data();
        const T* pp = probs_copy->data();
        for (std::int64_t b = 0; b < B; ++b) {
            const int y = (*labels_copy)[std::size_t(b)];
            T* grow = lg + b * K;
            const T* prow = pp + b * K;
            for (std::int64_t k = 0; k < K; ++k) {
                T delta = (k == y) ? T(1) : T(0);
                grow[k] += up * (prow[k] - delta) / T(B);
            }
        }
    });
    return {loss, probs};
}

// Row softmax without graph recording (classification output path).
template <typename T>
Tensor<T> softmax_probs(const Tensor<T>& logits) {
    NoGradGuard ng;
    if (logits.rank() != 2) throw UsageError("softmax_probs: logits must be [B,K]");
    const std::int64_t B = logits.dim(0), K = logits.dim(1);
    Tensor<T> probs = Tensor<T>::zeros({B, K});
    const T* lp = logits.data().data();
    T* pp = probs.data().data();
    for (std::int64_t b = 0; b < B; ++b) {
        const T* row = lp + b * K;
        T* prow = pp + b * K;
        double m = double(row[0]);
        for (std::int64_t k = 1; k < K; ++k) m = std::max(m, double(row[k]));
        double s = 0.0;
        for (std::int64_t k = 0; k < K; ++k) {
            double e = std::exp(double(row[k]) - m);
            prow[k] = T(e);
            s += e;
        }
        for (std::int64_t k = 0; k < K; ++k) prow[k] = T(double(prow[k]) / s);
    }
    return probs;
}

}  // namespace ffc
