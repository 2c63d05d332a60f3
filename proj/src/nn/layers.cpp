#include "qunet/nn/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "qunet/core/image_ops.hpp"

namespace qunet::nn {

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Map = Eigen::Map<MatRM<T>>;
template <typename T>
using ConstMap = Eigen::Map<const MatRM<T>>;

template <typename T>
void he_uniform(Param<T>& p, int fan_in, std::uint64_t seed) {
    Rng rng(derive_seed(seed, hash_string(p.name)));
    const double limit = std::sqrt(6.0 / fan_in);
    for (auto& v : p.value) v = static_cast<T>(uniform(rng, -limit, limit));
}

// cols[(ci*k*k + ky*k + kx), y*w + x] = x[ci, y + ky - pad, x + kx - pad]
template <typename T>
void im2col(const T* src, int channels, int h, int w, int k, T* cols) {
    const int pad = k / 2;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int ci = 0; ci < channels; ++ci) {
        const T* plane = src + ci * hw;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T* row = cols + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) * hw;
                const int dx = kx - pad;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - pad;
                    T* out = row + static_cast<std::size_t>(y) * w;
                    if (sy < 0 || sy >= h) {
                        std::fill(out, out + w, T{});
                        continue;
                    }
                    const T* in = plane + static_cast<std::size_t>(sy) * w;
                    const int x0 = std::max(0, -dx);
                    const int x1 = std::min(w, w - dx);
                    std::fill(out, out + x0, T{});
                    std::copy(in + x0 + dx, in + x1 + dx, out + x0);
                    std::fill(out + x1, out + w, T{});
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* cols, int channels, int h, int w, int k, T* dst) {
    const int pad = k / 2;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int ci = 0; ci < channels; ++ci) {
        T* plane = dst + ci * hw;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* row = cols + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) * hw;
                const int dx = kx - pad;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - pad;
                    if (sy < 0 || sy >= h) continue;
                    const T* in = row + static_cast<std::size_t>(y) * w;
                    T* out = plane + static_cast<std::size_t>(sy) * w;
                    const int x0 = std::max(0, -dx);
                    const int x1 = std::min(w, w - dx);
                    for (int x = x0; x < x1; ++x) out[x + dx] += in[x];
                }
            }
        }
    }
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(const std::string& name, int in_channels, int out_channels, int kernel)
    : weight(name + ".weight", {out_channels, in_channels, kernel, kernel}),
      bias(name + ".bias", {out_channels}),
      in_(in_channels),
      out_(out_channels),
      k_(kernel) {
    if (kernel % 2 == 0) throw ConfigError("Conv2d: kernel must be odd");
}

template <typename T>
void Conv2d<T>::init(std::uint64_t seed) {
    he_uniform(weight, in_ * k_ * k_, seed);
    std::fill(bias.value.begin(), bias.value.end(), T{});
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) const {
    if (x.c != in_) throw ShapeError("Conv2d " + weight.name + ": expected " + std::to_string(in_) + " channels, got " + x.shape_string());
    Tensor<T> y(x.n, out_, x.h, x.w);
    const auto hw = static_cast<Eigen::Index>(x.plane());
    const auto kk = static_cast<Eigen::Index>(in_) * k_ * k_;
    ConstMap<T> wmat(weight.value.data(), out_, kk);
    Buffer<T> cols(k_ == 1 ? 0 : static_cast<std::size_t>(kk * hw));
    for (int i = 0; i < x.n; ++i) {
        Map<T> out(y.sample(i), out_, hw);
        if (k_ == 1) {
            out.noalias() = wmat * ConstMap<T>(x.sample(i), kk, hw);
        } else {
            im2col(x.sample(i), in_, x.h, x.w, k_, cols.data());
            out.noalias() = wmat * ConstMap<T>(cols.data(), kk, hw);
        }
        for (int o = 0; o < out_; ++o) out.row(o).array() += bias.value[o];
    }
    return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& x, const Tensor<T>& dy, bool want_input_grad) {
    const auto hw = static_cast<Eigen::Index>(x.plane());
    const auto kk = static_cast<Eigen::Index>(in_) * k_ * k_;
    ConstMap<T> wmat(weight.value.data(), out_, kk);
    Map<T> dw(weight.grad.data(), out_, kk);
    Tensor<T> dx;
    if (want_input_grad) dx = Tensor<T>(x.n, in_, x.h, x.w);
    Buffer<T> cols(k_ == 1 ? 0 : static_cast<std::size_t>(kk * hw));
    Buffer<T> dcols(want_input_grad && k_ != 1 ? static_cast<std::size_t>(kk * hw) : 0);
    for (int i = 0; i < x.n; ++i) {
        ConstMap<T> g(dy.sample(i), out_, hw);
        for (int o = 0; o < out_; ++o) bias.grad[o] += g.row(o).sum();
        if (k_ == 1) {
            ConstMap<T> xin(x.sample(i), kk, hw);
            dw.noalias() += g * xin.transpose();
            if (want_input_grad) Map<T>(dx.sample(i), kk, hw).noalias() = wmat.transpose() * g;
        } else {
            im2col(x.sample(i), in_, x.h, x.w, k_, cols.data());
            ConstMap<T> c(cols.data(), kk, hw);
            dw.noalias() += g * c.transpose();
            if (want_input_grad) {
                Map<T>(dcols.data(), kk, hw).noalias() = wmat.transpose() * g;
                col2im_add(dcols.data(), in_, x.h, x.w, k_, dx.sample(i));
            }
        }
    }
    return dx;
}

// ------------------------------------------------------- ConvTranspose2x2

template <typename T>
ConvTranspose2x2<T>::ConvTranspose2x2(const std::string& name, int in_channels, int out_channels)
    : weight(name + ".weight", {out_channels, 2, 2, in_channels}), bias(name + ".bias", {out_channels}), in_(in_channels), out_(out_channels) {}

template <typename T>
void ConvTranspose2x2<T>::init(std::uint64_t seed) {
    // Each output pixel receives exactly `in_` contributions.
    he_uniform(weight, in_, seed);
    std::fill(bias.value.begin(), bias.value.end(), T{});
}

template <typename T>
Tensor<T> ConvTranspose2x2<T>::forward(const Tensor<T>& x) const {
    if (x.c != in_) throw ShapeError("ConvTranspose2x2 " + weight.name + ": channel mismatch " + x.shape_string());
    Tensor<T> y(x.n, out_, 2 * x.h, 2 * x.w);
    const auto hw = static_cast<Eigen::Index>(x.plane());
    ConstMap<T> wmat(weight.value.data(), out_ * 4, in_);
    MatRM<T> z(out_ * 4, hw);
    for (int i = 0; i < x.n; ++i) {
        z.noalias() = wmat * ConstMap<T>(x.sample(i), in_, hw);
        for (int o = 0; o < out_; ++o) {
            T* dst = y.channel(i, o);
            const T b = bias.value[o];
            for (int a = 0; a < 2; ++a) {
                for (int bb = 0; bb < 2; ++bb) {
                    const T* row = z.data() + (static_cast<std::size_t>(o) * 4 + a * 2 + bb) * hw;
                    for (int yy = 0; yy < x.h; ++yy) {
                        T* out = dst + static_cast<std::size_t>(2 * yy + a) * y.w + bb;
                        const T* in = row + static_cast<std::size_t>(yy) * x.w;
                        for (int xx = 0; xx < x.w; ++xx) out[2 * xx] = in[xx] + b;
                    }
                }
            }
        }
    }
    return y;
}

template <typename T>
Tensor<T> ConvTranspose2x2<T>::backward(const Tensor<T>& x, const Tensor<T>& dy) {
    const auto hw = static_cast<Eigen::Index>(x.plane());
    ConstMap<T> wmat(weight.value.data(), out_ * 4, in_);
    Map<T> dw(weight.grad.data(), out_ * 4, in_);
    Tensor<T> dx(x.n, in_, x.h, x.w);
    MatRM<T> dz(out_ * 4, hw);
    for (int i = 0; i < x.n; ++i) {
        for (int o = 0; o < out_; ++o) {
            const T* src = dy.channel(i, o);
            T bsum = T{};
            for (int a = 0; a < 2; ++a) {
                for (int bb = 0; bb < 2; ++bb) {
                    T* row = dz.data() + (static_cast<std::size_t>(o) * 4 + a * 2 + bb) * hw;
                    for (int yy = 0; yy < x.h; ++yy) {
                        const T* in = src + static_cast<std::size_t>(2 * yy + a) * dy.w + bb;
                        T* out = row + static_cast<std::size_t>(yy) * x.w;
                        for (int xx = 0; xx < x.w; ++xx) {
                            out[xx] = in[2 * xx];
                            bsum += in[2 * xx];
                        }
                    }
                }
            }
            bias.grad[o] += bsum;
        }
        ConstMap<T> xin(x.sample(i), in_, hw);
        dw.noalias() += dz * xin.transpose();
        Map<T>(dx.sample(i), in_, hw).noalias() = wmat.transpose() * dz;
    }
    return dx;
}

// -------------------------------------------------------------- BatchNorm

template <typename T>
BatchNorm<T>::BatchNorm(const std::string& name, int channels)
    : gamma(name + ".gamma", {channels}),
      beta(name + ".beta", {channels}),
      running_mean(name + ".running_mean", {channels}, false),
      running_var(name + ".running_var", {channels}, false) {
    std::fill(gamma.value.begin(), gamma.value.end(), T{1});
    std::fill(running_var.value.begin(), running_var.value.end(), T{1});
}

template <typename T>
Tensor<T> BatchNorm<T>::forward_train(const Tensor<T>& x, Cache& cache) {
    const int c = static_cast<int>(gamma.size());
    if (x.c != c) throw ShapeError("BatchNorm " + gamma.name + ": channel mismatch");
    const std::size_t hw = x.plane();
    const double count = static_cast<double>(x.n) * static_cast<double>(hw);
    Tensor<T> y(x.n, x.c, x.h, x.w);
    cache.normalized = Tensor<T>(x.n, x.c, x.h, x.w);
    cache.inv_std.assign(static_cast<std::size_t>(c), T{});
    for (int ch = 0; ch < c; ++ch) {
        double sum = 0.0;
        for (int i = 0; i < x.n; ++i) {
            const T* p = x.channel(i, ch);
            for (std::size_t k = 0; k < hw; ++k) sum += p[k];
        }
        const double mean = sum / count;
        double sq = 0.0;
        for (int i = 0; i < x.n; ++i) {
            const T* p = x.channel(i, ch);
            for (std::size_t k = 0; k < hw; ++k) sq += (p[k] - mean) * (p[k] - mean);
        }
        const double var = sq / count;
        const double inv = 1.0 / std::sqrt(var + kEpsilon);
        cache.inv_std[ch] = static_cast<T>(inv);
        for (int i = 0; i < x.n; ++i) {
            const T* p = x.channel(i, ch);
            T* xh = cache.normalized.channel(i, ch);
            T* out = y.channel(i, ch);
            for (std::size_t k = 0; k < hw; ++k) {
                xh[k] = static_cast<T>((p[k] - mean) * inv);
                out[k] = gamma.value[ch] * xh[k] + beta.value[ch];
            }
        }
        const double unbiased = count > 1 ? var * count / (count - 1) : var;
        running_mean.value[ch] = static_cast<T>((1 - kMomentum) * running_mean.value[ch] + kMomentum * mean);
        running_var.value[ch] = static_cast<T>((1 - kMomentum) * running_var.value[ch] + kMomentum * unbiased);
    }
    return y;
}

template <typename T>
Tensor<T> BatchNorm<T>::forward_eval(const Tensor<T>& x) const {
    const int c = static_cast<int>(gamma.size());
    if (x.c != c) throw ShapeError("BatchNorm " + gamma.name + ": channel mismatch");
    Tensor<T> y(x.n, x.c, x.h, x.w);
    const std::size_t hw = x.plane();
    for (int ch = 0; ch < c; ++ch) {
        const T scale = static_cast<T>(gamma.value[ch] / std::sqrt(static_cast<double>(running_var.value[ch]) + kEpsilon));
        const T shift = beta.value[ch] - scale * running_mean.value[ch];
        for (int i = 0; i < x.n; ++i) {
            const T* p = x.channel(i, ch);
            T* out = y.channel(i, ch);
            for (std::size_t k = 0; k < hw; ++k) out[k] = scale * p[k] + shift;
        }
    }
    return y;
}

template <typename T>
Tensor<T> BatchNorm<T>::backward(const Cache& cache, const Tensor<T>& dy) {
    const int c = static_cast<int>(gamma.size());
    const auto& xh = cache.normalized;
    const std::size_t hw = xh.plane();
    const double count = static_cast<double>(xh.n) * static_cast<double>(hw);
    Tensor<T> dx(xh.n, xh.c, xh.h, xh.w);
    for (int ch = 0; ch < c; ++ch) {
        double sum_dy = 0.0;
        double sum_dy_xh = 0.0;
        for (int i = 0; i < xh.n; ++i) {
            const T* g = dy.channel(i, ch);
            const T* h = xh.channel(i, ch);
            for (std::size_t k = 0; k < hw; ++k) {
                sum_dy += g[k];
                sum_dy_xh += static_cast<double>(g[k]) * h[k];
            }
        }
        gamma.grad[ch] += static_cast<T>(sum_dy_xh);
        beta.grad[ch] += static_cast<T>(sum_dy);
        const double scale = static_cast<double>(gamma.value[ch]) * cache.inv_std[ch];
        const double mean_dy = sum_dy / count;
        const double mean_dy_xh = sum_dy_xh / count;
        for (int i = 0; i < xh.n; ++i) {
            const T* g = dy.channel(i, ch);
            const T* h = xh.channel(i, ch);
            T* out = dx.channel(i, ch);
            for (std::size_t k = 0; k < hw; ++k) out[k] = static_cast<T>(scale * (g[k] - mean_dy - h[k] * mean_dy_xh));
        }
    }
    return dx;
}

// ------------------------------------------------------------ elementwise

template <typename T>
void relu_inplace(Tensor<T>& x) {
    for (auto& v : x.data) v = v > T{} ? v : T{};
}

template <typename T>
void relu_backward_inplace(const Tensor<T>& y, Tensor<T>& dy) {
    for (std::size_t i = 0; i < dy.size(); ++i) {
        if (!(y.data[i] > T{})) dy.data[i] = T{};
    }
}

template <typename T>
void sigmoid_inplace(Tensor<T>& x) {
    for (auto& v : x.data) v = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
}

template <typename T>
Tensor<T> maxpool2(const Tensor<T>& x, std::vector<std::uint8_t>& argmax) {
    if (x.h % 2 || x.w % 2) throw ShapeError("maxpool2: odd spatial size " + x.shape_string());
    Tensor<T> y(x.n, x.c, x.h / 2, x.w / 2);
    argmax.assign(y.size(), 0);
    std::size_t k = 0;
    for (int i = 0; i < x.n; ++i) {
        for (int ch = 0; ch < x.c; ++ch) {
            const T* src = x.channel(i, ch);
            T* dst = y.channel(i, ch);
            for (int yy = 0; yy < y.h; ++yy) {
                for (int xx = 0; xx < y.w; ++xx, ++k) {
                    const T* p = src + static_cast<std::size_t>(2 * yy) * x.w + 2 * xx;
                    const T cand[4] = {p[0], p[1], p[x.w], p[x.w + 1]};
                    std::uint8_t best = 0;
                    for (std::uint8_t q = 1; q < 4; ++q) {
                        if (cand[q] > cand[best]) best = q;
                    }
                    dst[static_cast<std::size_t>(yy) * y.w + xx] = cand[best];
                    argmax[k] = best;
                }
            }
        }
    }
    return y;
}

template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& dy, const std::vector<std::uint8_t>& argmax, int in_h, int in_w) {
    Tensor<T> dx(dy.n, dy.c, in_h, in_w);
    std::size_t k = 0;
    for (int i = 0; i < dy.n; ++i) {
        for (int ch = 0; ch < dy.c; ++ch) {
            const T* g = dy.channel(i, ch);
            T* dst = dx.channel(i, ch);
            for (int yy = 0; yy < dy.h; ++yy) {
                for (int xx = 0; xx < dy.w; ++xx, ++k) {
                    const int a = argmax[k];
                    dst[static_cast<std::size_t>(2 * yy + a / 2) * in_w + 2 * xx + a % 2] += g[static_cast<std::size_t>(yy) * dy.w + xx];
                }
            }
        }
    }
    return dx;
}

template <typename T>
void dropout_inplace(Tensor<T>& x, double rate, Rng& rng, std::vector<std::uint8_t>& mask) {
    mask.assign(x.size(), 1);
    if (rate <= 0.0) return;
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (uniform01(rng) < rate) {
            mask[i] = 0;
            x.data[i] = T{};
        } else {
            x.data[i] *= scale;
        }
    }
}

template <typename T>
void dropout_backward_inplace(Tensor<T>& dy, double rate, const std::vector<std::uint8_t>& mask) {
    if (rate <= 0.0) return;
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < dy.size(); ++i) dy.data[i] = mask[i] ? dy.data[i] * scale : T{};
}

template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts) {
    int c = 0;
    for (const auto* p : parts) {
        if (p->n != parts.front()->n || p->h != parts.front()->h || p->w != parts.front()->w) {
            throw ShapeError("concat_channels: spatial mismatch");
        }
        c += p->c;
    }
    const auto& f = *parts.front();
    Tensor<T> y(f.n, c, f.h, f.w);
    for (int i = 0; i < f.n; ++i) {
        T* dst = y.sample(i);
        for (const auto* p : parts) dst = std::copy(p->sample(i), p->sample(i) + p->sample_size(), dst);
    }
    return y;
}

template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, int out_h, int out_w) {
    const auto ty = bilinear_taps(x.h, out_h);
    const auto tx = bilinear_taps(x.w, out_w);
    Tensor<T> y(x.n, x.c, out_h, out_w);
    for (int i = 0; i < x.n; ++i) {
        for (int ch = 0; ch < x.c; ++ch) {
            const T* s = x.channel(i, ch);
            T* d = y.channel(i, ch);
            for (int yy = 0; yy < out_h; ++yy) {
                const auto& a = ty[yy];
                const T* r0 = s + static_cast<std::size_t>(a.lo) * x.w;
                const T* r1 = s + static_cast<std::size_t>(a.hi) * x.w;
                for (int xx = 0; xx < out_w; ++xx) {
                    const auto& b = tx[xx];
                    const double top = r0[b.lo] * (1.0 - b.frac) + r0[b.hi] * b.frac;
                    const double bot = r1[b.lo] * (1.0 - b.frac) + r1[b.hi] * b.frac;
                    d[static_cast<std::size_t>(yy) * out_w + xx] = static_cast<T>(top * (1.0 - a.frac) + bot * a.frac);
                }
            }
        }
    }
    return y;
}

template <typename T>
Tensor<T> upsample_bilinear_backward(const Tensor<T>& dy, int in_h, int in_w) {
    const auto ty = bilinear_taps(in_h, dy.h);
    const auto tx = bilinear_taps(in_w, dy.w);
    Tensor<T> dx(dy.n, dy.c, in_h, in_w);
    for (int i = 0; i < dy.n; ++i) {
        for (int ch = 0; ch < dy.c; ++ch) {
            const T* g = dy.channel(i, ch);
            T* d = dx.channel(i, ch);
            for (int yy = 0; yy < dy.h; ++yy) {
                const auto& a = ty[yy];
                T* r0 = d + static_cast<std::size_t>(a.lo) * in_w;
                T* r1 = d + static_cast<std::size_t>(a.hi) * in_w;
                for (int xx = 0; xx < dy.w; ++xx) {
                    const auto& b = tx[xx];
                    const double v = g[static_cast<std::size_t>(yy) * dy.w + xx];
                    r0[b.lo] += static_cast<T>(v * (1.0 - a.frac) * (1.0 - b.frac));
                    r0[b.hi] += static_cast<T>(v * (1.0 - a.frac) * b.frac);
                    r1[b.lo] += static_cast<T>(v * a.frac * (1.0 - b.frac));
                    r1[b.hi] += static_cast<T>(v * a.frac * b.frac);
                }
            }
        }
    }
    return dx;
}

#define QUNET_INSTANTIATE_LAYERS(T)                                                                       \
    template class Conv2d<T>;                                                                             \
    template class ConvTranspose2x2<T>;                                                                   \
    template class BatchNorm<T>;                                                                          \
    template void relu_inplace(Tensor<T>&);                                                               \
    template void relu_backward_inplace(const Tensor<T>&, Tensor<T>&);                                    \
    template void sigmoid_inplace(Tensor<T>&);                                                            \
    template Tensor<T> maxpool2(const Tensor<T>&, std::vector<std::uint8_t>&);                            \
    template Tensor<T> maxpool2_backward(const Tensor<T>&, const std::vector<std::uint8_t>&, int, int);   \
    template void dropout_inplace(Tensor<T>&, double, Rng&, std::vector<std::uint8_t>&);                  \
    template void dropout_backward_inplace(Tensor<T>&, double, const std::vector<std::uint8_t>&);         \
    template Tensor<T> concat_channels(const std::vector<const Tensor<T>*>&);                             \
    template Tensor<T> upsample_bilinear(const Tensor<T>&, int, int);                                     \
    template Tensor<T> upsample_bilinear_backward(const Tensor<T>&, int, int);

QUNET_INSTANTIATE_LAYERS(float)
QUNET_INSTANTIATE_LAYERS(double)

#undef QUNET_INSTANTIATE_LAYERS

}  // namespace qunet::nn
