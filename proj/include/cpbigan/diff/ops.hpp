#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "cpbigan/diff/tape.hpp"
#include "cpbigan/diff/tensor.hpp"

// Differentiable operations. Shape contracts:
//   affine            x[N,in] . W[out,in]^T + b[out]          -> [N,out]
//   conv2d            x[N,C,H,W] * W[O,C,k,k] + b[O]          -> [N,O,(H+2p-k)/s+1,...]
//   conv_transpose2d  x[N,C,H,W] * W[C,O,k,k] + b[O]          -> [N,O,(H-1)s-2p+k,...]
//   concat            along axis 1 of rank-2 or rank-4 inputs with equal other dims
//   tile_spatial      v[N,k] -> [N,k,H,W]
//   avg_pool2         [N,C,H,W] -> [N,C,H/2,W/2]
// Elementwise binary ops require identical shapes.

namespace cpbigan::diff {

namespace detail {

[[noreturn]] inline void shape_error(const char* op, const std::string& what) {
    throw DataError(std::string(op) + ": " + what);
}

inline int next_id(std::size_t tape_size) { return static_cast<int>(tape_size); }

/// Gathers patches of a [C,Hb,Wb] image into cols[C*k*k][Hs*Ws].
template <class T, class U>
void im2col(const T* src, int C, int Hb, int Wb, int k, int s, int p, int Hs, int Ws, U* cols) {
    std::size_t r = 0;
    for (int c = 0; c < C; ++c)
        for (int kh = 0; kh < k; ++kh)
            for (int kw = 0; kw < k; ++kw, ++r) {
                U* row = cols + r * static_cast<std::size_t>(Hs * Ws);
                for (int h = 0; h < Hs; ++h) {
                    const int ih = h * s - p + kh;
                    for (int w = 0; w < Ws; ++w) {
                        const int iw = w * s - p + kw;
                        row[h * Ws + w] = (ih >= 0 && ih < Hb && iw >= 0 && iw < Wb)
                                              ? static_cast<U>(src[(c * Hb + ih) * Wb + iw])
                                              : U(0);
                    }
                }
            }
}

/// Adjoint of im2col: scatters cols back onto a [C,Hb,Wb] accumulator.
template <class U, class V>
void col2im(const U* cols, int C, int Hb, int Wb, int k, int s, int p, int Hs, int Ws, V* dst) {
    std::size_t r = 0;
    for (int c = 0; c < C; ++c)
        for (int kh = 0; kh < k; ++kh)
            for (int kw = 0; kw < k; ++kw, ++r) {
                const U* row = cols + r * static_cast<std::size_t>(Hs * Ws);
                for (int h = 0; h < Hs; ++h) {
                    const int ih = h * s - p + kh;
                    if (ih < 0 || ih >= Hb) continue;
                    for (int w = 0; w < Ws; ++w) {
                        const int iw = w * s - p + kw;
                        if (iw >= 0 && iw < Wb) dst[(c * Hb + ih) * Wb + iw] += static_cast<V>(row[h * Ws + w]);
                    }
                }
            }
}

template <class T, class F, class G>
Var unary(Tape<T>& t, Var x, F&& fwd, G&& dydx) {
    const auto& xv = t.value(x);
    Tensor<T> y(xv.shape);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<T>(fwd(static_cast<double>(xv[i])));
    const bool rg = t.requires_grad(x);
    const int self = next_id(t.size());
    return t.push(std::move(y), rg, [x, self, dydx](Tape<T>& tp) {
        const auto& gy = tp.grad(Var{self});
        const auto& xv2 = tp.value(x);
        const auto& yv = tp.value(Var{self});
        auto& gx = tp.grad(x);
        for (std::size_t i = 0; i < gx.size(); ++i)
            gx[i] += static_cast<T>(static_cast<double>(gy[i]) *
                                    dydx(static_cast<double>(xv2[i]), static_cast<double>(yv[i])));
    });
}

} // namespace detail

template <class T>
Var affine(Tape<T>& t, Var x, Var W, Var b = {}) {
    const auto& xv = t.value(x);
    const auto& wv = t.value(W);
    if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(1))
        detail::shape_error("affine", "x" + shape_str(xv.shape) + " vs W" + shape_str(wv.shape));
    const int N = xv.dim(0), in = xv.dim(1), out = wv.dim(0);
    if (b.valid() && (t.value(b).rank() != 1 || t.value(b).dim(0) != out))
        detail::shape_error("affine", "bias shape " + shape_str(t.value(b).shape));
    Tensor<T> y({N, out});
    const T* bp = b.valid() ? t.value(b).data.data() : nullptr;
    for (int n = 0; n < N; ++n) {
        const T* xr = xv.data.data() + static_cast<std::size_t>(n) * in;
        for (int o = 0; o < out; ++o) {
            const T* wr = wv.data.data() + static_cast<std::size_t>(o) * in;
            double acc = bp ? static_cast<double>(bp[o]) : 0.0;
            for (int i = 0; i < in; ++i) acc += static_cast<double>(xr[i]) * static_cast<double>(wr[i]);
            y[static_cast<std::size_t>(n) * out + o] = static_cast<T>(acc);
        }
    }
    const bool rg = t.requires_grad(x) || t.requires_grad(W) || (b.valid() && t.requires_grad(b));
    const int self = detail::next_id(t.size());
    return t.push(std::move(y), rg, [=](Tape<T>& tp) {
        const auto& gy = tp.grad(Var{self});
        const auto& xv2 = tp.value(x);
        const auto& wv2 = tp.value(W);
        std::vector<double> buf(static_cast<std::size_t>(in));
        if (tp.requires_grad(x)) {
            auto& gx = tp.grad(x);
            for (int n = 0; n < N; ++n) {
                std::fill(buf.begin(), buf.end(), 0.0);
                for (int o = 0; o < out; ++o) {
                    const double g = gy[static_cast<std::size_t>(n) * out + o];
                    if (g == 0.0) continue;
                    const T* wr = wv2.data.data() + static_cast<std::size_t>(o) * in;
                    for (int i = 0; i < in; ++i) buf[static_cast<std::size_t>(i)] += g * static_cast<double>(wr[i]);
                }
                for (int i = 0; i < in; ++i) gx[static_cast<std::size_t>(n) * in + i] += static_cast<T>(buf[static_cast<std::size_t>(i)]);
            }
        }
        if (tp.requires_grad(W)) {
            auto& gw = tp.grad(W);
            for (int o = 0; o < out; ++o) {
                std::fill(buf.begin(), buf.end(), 0.0);
                for (int n = 0; n < N; ++n) {
                    const double g = gy[static_cast<std::size_t>(n) * out + o];
                    if (g == 0.0) continue;
                    const T* xr = xv2.data.data() + static_cast<std::size_t>(n) * in;
                    for (int i = 0; i < in; ++i) buf[static_cast<std::size_t>(i)] += g * static_cast<double>(xr[i]);
                }
                for (int i = 0; i < in; ++i) gw[static_cast<std::size_t>(o) * in + i] += static_cast<T>(buf[static_cast<std::size_t>(i)]);
            }
        }
        if (b.valid() && tp.requires_grad(b)) {
            auto& gb = tp.grad(b);
            for (int o = 0; o < out; ++o) {
                double acc = 0;
                for (int n = 0; n < N; ++n) acc += gy[static_cast<std::size_t>(n) * out + o];
                gb[static_cast<std::size_t>(o)] += static_cast<T>(acc);
            }
        }
    });
}

template <class T>
Var conv2d(Tape<T>& t, Var x, Var W, Var b, int stride, int pad) {
    const auto& xv = t.value(x);
    const auto& wv = t.value(W);
    if (xv.rank() != 4 || wv.rank() != 4 || wv.dim(1) != xv.dim(1) || wv.dim(2) != wv.dim(3))
        detail::shape_error("conv2d", "x" + shape_str(xv.shape) + " vs W" + shape_str(wv.shape));
    const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), Wd = xv.dim(3);
    const int O = wv.dim(0), k = wv.dim(2);
    const int Ho = (H + 2 * pad - k) / stride + 1, Wo = (Wd + 2 * pad - k) / stride + 1;
    if (Ho <= 0 || Wo <= 0) detail::shape_error("conv2d", "empty output");
    if (b.valid() && t.value(b).size() != static_cast<std::size_t>(O)) detail::shape_error("conv2d", "bias size");
    const int R = C * k * k, P = Ho * Wo;
    Tensor<T> y({N, O, Ho, Wo});
    std::vector<T> cols(static_cast<std::size_t>(R) * P);
    std::vector<double> acc(static_cast<std::size_t>(P));
    const T* bp = b.valid() ? t.value(b).data.data() : nullptr;
    for (int n = 0; n < N; ++n) {
        detail::im2col(xv.data.data() + static_cast<std::size_t>(n) * C * H * Wd, C, H, Wd, k, stride, pad, Ho, Wo, cols.data());
        for (int o = 0; o < O; ++o) {
            std::fill(acc.begin(), acc.end(), bp ? static_cast<double>(bp[o]) : 0.0);
            const T* wr = wv.data.data() + static_cast<std::size_t>(o) * R;
            for (int r = 0; r < R; ++r) {
                const double w = wr[r];
                const T* cr = cols.data() + static_cast<std::size_t>(r) * P;
                for (int q = 0; q < P; ++q) acc[static_cast<std::size_t>(q)] += w * static_cast<double>(cr[q]);
            }
            T* yr = y.data.data() + (static_cast<std::size_t>(n) * O + o) * P;
            for (int q = 0; q < P; ++q) yr[q] = static_cast<T>(acc[static_cast<std::size_t>(q)]);
        }
    }
    const bool rg = t.requires_grad(x) || t.requires_grad(W) || (b.valid() && t.requires_grad(b));
    const int self = detail::next_id(t.size());
    return t.push(std::move(y), rg, [=](Tape<T>& tp) {
        const auto& gy = tp.grad(Var{self});
        const auto& xv2 = tp.value(x);
        const auto& wv2 = tp.value(W);
        const bool need_x = tp.requires_grad(x), need_w = tp.requires_grad(W);
        std::vector<T> cols2(static_cast<std::size_t>(R) * P);
        std::vector<double> dcols(need_x ? static_cast<std::size_t>(R) * P : 0);
        std::vector<double> dimg(need_x ? static_cast<std::size_t>(C) * H * Wd : 0);
        std::vector<double> gw_acc(need_w ? static_cast<std::size_t>(O) * R : 0, 0.0);
        for (int n = 0; n < N; ++n) {
            const T* g = gy.data() + static_cast<std::size_t>(n) * O * P;
            if (need_w) {
                detail::im2col(xv2.data.data() + static_cast<std::size_t>(n) * C * H * Wd, C, H, Wd, k, stride, pad, Ho, Wo, cols2.data());
                for (int o = 0; o < O; ++o) {
                    const T* go = g + static_cast<std::size_t>(o) * P;
                    for (int r = 0; r < R; ++r) {
                        const T* cr = cols2.data() + static_cast<std::size_t>(r) * P;
                        double s = 0;
                        for (int q = 0; q < P; ++q) s += static_cast<double>(go[q]) * static_cast<double>(cr[q]);
                        gw_acc[static_cast<std::size_t>(o) * R + r] += s;
                    }
                }
            }
            if (need_x) {
                std::fill(dcols.begin(), dcols.end(), 0.0);
                for (int o = 0; o < O; ++o) {
                    const T* go = g + static_cast<std::size_t>(o) * P;
                    const T* wr = wv2.data.data() + static_cast<std::size_t>(o) * R;
                    for (int r = 0; r < R; ++r) {
                        const double w = wr[r];
                        double* dr = dcols.data() + static_cast<std::size_t>(r) * P;
                        for (int q = 0; q < P; ++q) dr[q] += w * static_cast<double>(go[q]);
                    }
                }
                std::fill(dimg.begin(), dimg.end(), 0.0);
                detail::col2im(dcols.data(), C, H, Wd, k, stride, pad, Ho, Wo, dimg.data());
                auto& gx = tp.grad(x);
                T* gxn = gx.data() + static_cast<std::size_t>(n) * C * H * Wd;
                for (std::size_t i = 0; i < dimg.size(); ++i) gxn[i] += static_cast<T>(dimg[i]);
            }
        }
        if (need_w) {
            auto& gw = tp.grad(W);
            for (std::size_t i = 0; i < gw_acc.size(); ++i) gw[i] += static_cast<T>(gw_acc[i]);
        }
        if (b.valid() && tp.requires_grad(b)) {
            auto& gb = tp.grad(b);
            for (int o = 0; o < O; ++o) {
                double s = 0;
                for (int n = 0; n < N; ++n) {
                    const T* go = gy.data() + (static_cast<std::size_t>(n) * O + o) * P;
                    for (int q = 0; q < P; ++q) s += go[q];
                }
                gb[static_cast<std::size_t>(o)] += static_cast<T>(s);
            }
        }
    });
}

template <class T>
Var conv_transpose2d(Tape<T>& t, Var x, Var W, Var b, int stride, int pad) {
    const auto& xv = t.value(x);
    const auto& wv = t.value(W);
    if (xv.rank() != 4 || wv.rank() != 4 || wv.dim(0) != xv.dim(1) || wv.dim(2) != wv.dim(3))
        detail::shape_error("conv_transpose2d", "x" + shape_str(xv.shape) + " vs W" + shape_str(wv.shape));
    const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), Wd = xv.dim(3);
    const int O = wv.dim(1), k = wv.dim(2);
    const int Ho = (H - 1) * stride - 2 * pad + k, Wo = (Wd - 1) * stride - 2 * pad + k;
    if (Ho <= 0 || Wo <= 0) detail::shape_error("conv_transpose2d", "empty output");
    if (b.valid() && t.value(b).size() != static_cast<std::size_t>(O)) detail::shape_error("conv_transpose2d", "bias size");
    const int R = O * k * k, P = H * Wd;
    Tensor<T> y({N, O, Ho, Wo});
    std::vector<double> cols(static_cast<std::size_t>(R) * P), img(static_cast<std::size_t>(O) * Ho * Wo);
    const T* bp = b.valid() ? t.value(b).data.data() : nullptr;
    for (int n = 0; n < N; ++n) {
        std::fill(cols.begin(), cols.end(), 0.0);
        const T* xn = xv.data.data() + static_cast<std::size_t>(n) * C * P;
        for (int c = 0; c < C; ++c) {
            const T* xc = xn + static_cast<std::size_t>(c) * P;
            const T* wr = wv.data.data() + static_cast<std::size_t>(c) * R;
            for (int r = 0; r < R; ++r) {
                const double w = wr[r];
                double* cr = cols.data() + static_cast<std::size_t>(r) * P;
                for (int q = 0; q < P; ++q) cr[q] += w * static_cast<double>(xc[q]);
            }
        }
        for (int o = 0; o < O; ++o)
            std::fill(img.begin() + static_cast<std::ptrdiff_t>(o) * Ho * Wo, img.begin() + static_cast<std::ptrdiff_t>(o + 1) * Ho * Wo,
                      bp ? static_cast<double>(bp[o]) : 0.0);
        detail::col2im(cols.data(), O, Ho, Wo, k, stride, pad, H, Wd, img.data());
        T* yn = y.data.data() + static_cast<std::size_t>(n) * O * Ho * Wo;
        for (std::size_t i = 0; i < img.size(); ++i) yn[i] = static_cast<T>(img[i]);
    }
    const bool rg = t.requires_grad(x) || t.requires_grad(W) || (b.valid() && t.requires_grad(b));
    const int self = detail::next_id(t.size());
    return t.push(std::move(y), rg, [=](Tape<T>& tp) {
        const auto& gy = tp.grad(Var{self});
        const auto& xv2 = tp.value(x);
        const auto& wv2 = tp.value(W);
        const bool need_x = tp.requires_grad(x), need_w = tp.requires_grad(W);
        std::vector<T> dcols(static_cast<std::size_t>(R) * P);
        std::vector<double> gw_acc(need_w ? static_cast<std::size_t>(C) * R : 0, 0.0);
        for (int n = 0; n < N; ++n) {
            detail::im2col(gy.data() + static_cast<std::size_t>(n) * O * Ho * Wo, O, Ho, Wo, k, stride, pad, H, Wd, dcols.data());
            const T* xn = xv2.data.data() + static_cast<std::size_t>(n) * C * P;
            for (int c = 0; c < C; ++c) {
                const T* wr = wv2.data.data() + static_cast<std::size_t>(c) * R;
                const T* xc = xn + static_cast<std::size_t>(c) * P;
                if (need_x) {
                    auto& gx = tp.grad(x);
                    T* gxc = gx.data() + (static_cast<std::size_t>(n) * C + c) * P;
                    std::vector<double> acc(static_cast<std::size_t>(P), 0.0);
                    for (int r = 0; r < R; ++r) {
                        const double w = wr[r];
                        const T* dr = dcols.data() + static_cast<std::size_t>(r) * P;
                        for (int q = 0; q < P; ++q) acc[static_cast<std::size_t>(q)] += w * static_cast<double>(dr[q]);
                    }
                    for (int q = 0; q < P; ++q) gxc[q] += static_cast<T>(acc[static_cast<std::size_t>(q)]);
                }
                if (need_w) {
                    for (int r = 0; r < R; ++r) {
                        const T* dr = dcols.data() + static_cast<std::size_t>(r) * P;
                        double s = 0;
                        for (int q = 0; q < P; ++q) s += static_cast<double>(xc[q]) * static_cast<double>(dr[q]);
                        gw_acc[static_cast<std::size_t>(c) * R + r] += s;
                    }
                }
            }
        }
        if (need_w) {
            auto& gw = tp.grad(W);
            for (std::size_t i = 0; i < gw_acc.size(); ++i) gw[i] += static_cast<T>(gw_acc[i]);
        }
        if (b.valid() && tp.requires_grad(b)) {
            auto& gb = tp.grad(b);
            const int Po = Ho * Wo;
            for (int o = 0; o < O; ++o) {
                double s = 0;
                for (int n = 0; n < N; ++n) {
                    const T* go = gy.data() + (static_cast<std::size_t>(n) * O + o) * Po;
                    for (int q = 0; q < Po; ++q) s += go[q];
                }
                gb[static_cast<std::size_t>(o)] += static_cast<T>(s);
            }
        }
    });
}

template <class T>
Var relu(Tape<T>& t, Var x) {
    return detail::unary(t, x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

template <class T>
Var leaky_relu(Tape<T>& t, Var x, double alpha = 0.2) {
    return detail::unary(
        t, x, [alpha](double v) { return v > 0 ? v : alpha * v; },
        [alpha](double v, double) { return v > 0 ? 1.0 : alpha; });
}

template <class T>
Var sigmoid(Tape<T>& t, Var x) {
    return detail::unary(
        t, x,
        [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
        [](double v, double) {
            const double s = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
            return s * (1.0 - s);
        });
}

/// x * sigmoid(x); smooth everywhere, so finite differences never straddle a kink.
template <class T>
Var silu(Tape<T>& t, Var x) {
    return detail::unary(
        t, x, [](double v) { return v / (1.0 + std::exp(-v)); },
        [](double v, double) {
            const double s = 1.0 / (1.0 + std::exp(-v));
            return s * (1.0 + v * (1.0 - s));
        });
}

template <class T>
Var tanh(Tape<T>& t, Var x) {
    return detail::unary(t, x, [](double v) { return std::tanh(v); },
                         [](double v, double) { const double th = std::tanh(v); return 1.0 - th * th; });
}

/// log(clamp(x, eps, 1 - eps)); zero gradient where the clamp is active.
template <class T>
Var log_clamped(Tape<T>& t, Var x, double eps) {
    return detail::unary(
        t, x, [eps](double v) { return std::log(std::clamp(v, eps, 1.0 - eps)); },
        [eps](double v, double) { return (v > eps && v < 1.0 - eps) ? 1.0 / v : 0.0; });
}

template <class T>
Var scale(Tape<T>& t, Var x, double a) {
    return detail::unary(t, x, [a](double v) { return a * v; }, [a](double, double) { return a; });
}

/// a*x + c
template <class T>
Var affine_scalar(Tape<T>& t, Var x, double a, double c) {
    return detail::unary(t, x, [a, c](double v) { return a * v + c; }, [a](double, double) { return a; });
}

template <class T>
Var one_minus(Tape<T>& t, Var x) { return affine_scalar(t, x, -1.0, 1.0); }

namespace detail {
template <class T, class F, class GA, class GB>
Var binary(Tape<T>& t, Var a, Var b, const char* name, F&& fwd, GA&& da, GB&& db) {
    const auto& av = t.value(a);
    const auto& bv = t.value(b);
    if (av.shape != bv.shape) shape_error(name, shape_str(av.shape) + " vs " + shape_str(bv.shape));
    Tensor<T> y(av.shape);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<T>(fwd(static_cast<double>(av[i]), static_cast<double>(bv[i])));
    const bool rg = t.requires_grad(a) || t.requires_grad(b);
    const int self = next_id(t.size());
    return t.push(std::move(y), rg, [a, b, self, da, db](Tape<T>& tp) {
        const auto& gy = tp.grad(Var{self});
        const auto& av2 = tp.value(a);
        const auto& bv2 = tp.value(b);
        if (tp.requires_grad(a)) {
            auto& ga = tp.grad(a);
            for (std::size_t i = 0; i < ga.size(); ++i)
                ga[i] += static_cast<T>(static_cast<double>(gy[i]) * da(static_cast<double>(av2[i]), static_cast<double>(bv2[i])));
        }
        if (tp.requires_grad(b)) {
            auto& gb = tp.grad(b);
            for (std::size_t i = 0; i < gb.size(); ++i)
                gb[i] += static_cast<T>(static_cast<double>(gy[i]) * db(static_cast<double>(av2[i]), static_cast<double>(bv2[i])));
        }
    });
}
} // namespace detail

template <class T>
Var add(Tape<T>& t, Var a, Var b) {
    return detail::binary(t, a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
                          [](double, double) { return 1.0; });
}

template <class T>
Var sub(Tape<T>& t, Var a, Var b) {
    return detail::binary(t, a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
                          [](double, double) { return -1.0; });
}

template <class T>
Var mul(Tape<T>& t, Var a, Var b) {
    return detail::binary(t, a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
                          [](double x, double) { return x; });
}

template <class T>
Var sum(Tape<T>& t, Var x) {
    const auto& xv = t.value(x);
    double s = 0;
    for (const T& v : xv.data) s += static_cast<double>(v);
    const int self = detail::next_id(t.size());
    return t.push(Tensor<T>({1}, std::vector<T>{static_cast<T>(s)}), t.requires_grad(x), [x, self](Tape<T>& tp) {
        const T g = tp.grad(Var{self})[0];
        auto& gx = tp.grad(x);
        for (auto& v : gx) v += g;
    });
}

template <class T>
Var mean(Tape<T>& t, Var x) {
    const auto n = t.value(x).size();
    if (n == 0) detail::shape_error("mean", "empty tensor");
    return scale(t, sum(t, x), 1.0 / static_cast<double>(n));
}

template <class T>
Var reshape(Tape<T>& t, Var x, Shape s) {
    const auto& xv = t.value(x);
    if (numel(s) != xv.size()) detail::shape_error("reshape", shape_str(xv.shape) + " -> " + shape_str(s));
    const int self = detail::next_id(t.size());
    return t.push(Tensor<T>(std::move(s), xv.data), t.requires_grad(x), [x, self](Tape<T>& tp) {
        const auto& gy = tp.grad(Var{self});
        auto& gx = tp.grad(x);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
    });
}

template <class T>
Var flatten(Tape<T>& t, Var x) {
    const auto& s = t.shape(x);
    const int n = s.at(0);
    return reshape(t, x, Shape{n, static_cast<int>(numel(s) / static_cast<std::size_t>(std::max(n, 1)))});
}

/// Concatenation along axis 1. Zero-width inputs are allowed.
template <class T>
Var concat(Tape<T>& t, const std::vector<Var>& xs) {
    if (xs.empty()) detail::shape_error("concat", "no inputs");
    const Shape& s0 = t.shape(xs[0]);
    const int N = s0.at(0);
    std::size_t inner = 1; // product of dims after axis 1
    for (std::size_t d = 2; d < s0.size(); ++d) inner *= static_cast<std::size_t>(s0[d]);
    int total = 0;
    bool rg = false;
    for (Var v : xs) {
        const Shape& s = t.shape(v);
        if (s.size() != s0.size() || s[0] != N) detail::shape_error("concat", shape_str(s) + " vs " + shape_str(s0));
        for (std::size_t d = 2; d < s.size(); ++d)
            if (s[d] != s0[d]) detail::shape_error("concat", shape_str(s) + " vs " + shape_str(s0));
        total += s[1];
        rg = rg || t.requires_grad(v);
    }
    Shape os = s0;
    os[1] = total;
    Tensor<T> y(os);
    const std::size_t row = static_cast<std::size_t>(total) * inner;
    std::size_t off = 0;
    for (Var v : xs) {
        const auto& xv = t.value(v);
        const std::size_t w = static_cast<std::size_t>(xv.dim(1)) * inner;
        for (int n = 0; n < N; ++n)
            std::copy_n(xv.data.data() + static_cast<std::size_t>(n) * w, w, y.data.data() + static_cast<std::size_t>(n) * row + off);
        off += w;
    }
    const int self = detail::next_id(t.size());
    return t.push(std::move(y), rg, [xs, self, N, row, inner](Tape<T>& tp) {
        const auto& gy = tp.grad(Var{self});
        std::size_t off2 = 0;
        for (Var v : xs) {
            const std::size_t w = static_cast<std::size_t>(tp.shape(v)[1]) * inner;
            if (tp.requires_grad(v) && w > 0) {
                auto& gx = tp.grad(v);
                for (int n = 0; n < N; ++n)
                    for (std::size_t i = 0; i < w; ++i)
                        gx[static_cast<std::size_t>(n) * w + i] += gy[static_cast<std::size_t>(n) * row + off2 + i];
            }
            off2 += w;
        }
    });
}

template <class T>
Var tile_spatial(Tape<T>& t, Var v, int H, int W) {
    const auto& vv = t.value(v);
    if (vv.rank() != 2) detail::shape_error("tile_spatial", "expects rank 2, got " + shape_str(vv.shape));
    const int N = vv.dim(0), K = vv.dim(1), P = H * W;
    Tensor<T> y({N, K, H, W});
    for (int n = 0; n < N; ++n)
        for (int k = 0; k < K; ++k)
            std::fill_n(y.data.data() + (static_cast<std::size_t>(n) * K + k) * P, P, vv[static_cast<std::size_t>(n) * K + k]);
    const int self = detail::next_id(t.size());
    return t.push(std::move(y), t.requires_grad(v), [v, self, N, K, P](Tape<T>& tp) {
        const auto& gy = tp.grad(Var{self});
        auto& gv = tp.grad(v);
        for (int n = 0; n < N; ++n)
            for (int k = 0; k < K; ++k) {
                double s = 0;
                const T* g = gy.data() + (static_cast<std::size_t>(n) * K + k) * P;
                for (int q = 0; q < P; ++q) s += g[q];
                gv[static_cast<std::size_t>(n) * K + k] += static_cast<T>(s);
            }
    });
}

template <class T>
Var avg_pool2(Tape<T>& t, Var x) {
    const auto& xv = t.value(x);
    if (xv.rank() != 4 || xv.dim(2) % 2 || xv.dim(3) % 2) detail::shape_error("avg_pool2", shape_str(xv.shape));
    const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3), Ho = H / 2, Wo = W / 2;
    Tensor<T> y({N, C, Ho, Wo});
    for (int nc = 0; nc < N * C; ++nc)
        for (int h = 0; h < Ho; ++h)
            for (int w = 0; w < Wo; ++w) {
                const T* s = xv.data.data() + static_cast<std::size_t>(nc) * H * W;
                const double v = (static_cast<double>(s[(2 * h) * W + 2 * w]) + s[(2 * h) * W + 2 * w + 1] +
                                  s[(2 * h + 1) * W + 2 * w] + s[(2 * h + 1) * W + 2 * w + 1]) * 0.25;
                y[(static_cast<std::size_t>(nc) * Ho + h) * Wo + w] = static_cast<T>(v);
            }
    const int self = detail::next_id(t.size());
    return t.push(std::move(y), t.requires_grad(x), [x, self, N, C, H, W, Ho, Wo](Tape<T>& tp) {
        const auto& gy = tp.grad(Var{self});
        auto& gx = tp.grad(x);
        for (int nc = 0; nc < N * C; ++nc)
            for (int h = 0; h < Ho; ++h)
                for (int w = 0; w < Wo; ++w) {
                    const T g = static_cast<T>(0.25 * gy[(static_cast<std::size_t>(nc) * Ho + h) * Wo + w]);
                    T* d = gx.data() + static_cast<std::size_t>(nc) * H * W;
                    d[(2 * h) * W + 2 * w] += g;
                    d[(2 * h) * W + 2 * w + 1] += g;
                    d[(2 * h + 1) * W + 2 * w] += g;
                    d[(2 * h + 1) * W + 2 * w + 1] += g;
                }
    });
}

/// Mean over rows of -log(clamp(softmax(logits)[label])). logits[N,K].
template <class T>
Var softmax_cross_entropy(Tape<T>& t, Var logits, std::span<const int> labels, double eps) {
    const auto& lv = t.value(logits);
    if (lv.rank() != 2 || static_cast<std::size_t>(lv.dim(0)) != labels.size())
        detail::shape_error("softmax_cross_entropy", "logits " + shape_str(lv.shape) + " vs " + std::to_string(labels.size()) + " labels");
    const int N = lv.dim(0), K = lv.dim(1);
    std::vector<double> probs(static_cast<std::size_t>(N) * K);
    double loss = 0;
    for (int n = 0; n < N; ++n) {
        const int y = labels[static_cast<std::size_t>(n)];
        if (y < 0 || y >= K) detail::shape_error("softmax_cross_entropy", "label out of range");
        double mx = -INFINITY;
        for (int k = 0; k < K; ++k) mx = std::max(mx, static_cast<double>(lv[static_cast<std::size_t>(n) * K + k]));
        double z = 0;
        for (int k = 0; k < K; ++k) z += std::exp(static_cast<double>(lv[static_cast<std::size_t>(n) * K + k]) - mx);
        for (int k = 0; k < K; ++k)
            probs[static_cast<std::size_t>(n) * K + k] = std::exp(static_cast<double>(lv[static_cast<std::size_t>(n) * K + k]) - mx) / z;
        loss -= std::log(std::clamp(probs[static_cast<std::size_t>(n) * K + y], eps, 1.0 - eps));
    }
    loss /= N;
    std::vector<int> lab(labels.begin(), labels.end());
    const int self = detail::next_id(t.size());
    return t.push(Tensor<T>({1}, std::vector<T>{static_cast<T>(loss)}), t.requires_grad(logits),
                  [logits, self, probs = std::move(probs), lab = std::move(lab), N, K, eps](Tape<T>& tp) {
                      const double g = tp.grad(Var{self})[0];
                      auto& gl = tp.grad(logits);
                      for (int n = 0; n < N; ++n) {
                          const int y = lab[static_cast<std::size_t>(n)];
                          const double py = probs[static_cast<std::size_t>(n) * K + y];
                          if (!(py > eps && py < 1.0 - eps)) continue;
                          for (int k = 0; k < K; ++k) {
                              const double pk = probs[static_cast<std::size_t>(n) * K + k];
                              gl[static_cast<std::size_t>(n) * K + k] += static_cast<T>(g * (pk - (k == y ? 1.0 : 0.0)) / N);
                          }
                      }
                  });
}

/// Mean binary cross-entropy of probabilities p[N,1] (or [N]) against 0/1 targets.
template <class T>
Var binary_cross_entropy(Tape<T>& t, Var p, std::span<const int> targets, double eps) {
    const auto n = t.value(p).size();
    if (n != targets.size()) detail::shape_error("binary_cross_entropy", "target count mismatch");
    Tensor<T> tgt(t.shape(p));
    for (std::size_t i = 0; i < n; ++i) tgt[i] = static_cast<T>(targets[i]);
    Var tv = t.constant(tgt);
    Var pos = mul(t, tv, log_clamped(t, p, eps));
    Var neg = mul(t, t.constant([&] {
                         Tensor<T> c(tgt.shape);
                         for (std::size_t i = 0; i < n; ++i) c[i] = static_cast<T>(1 - targets[i]);
                         return c;
                     }()),
                  log_clamped(t, one_minus(t, p), eps));
    return scale(t, mean(t, add(t, pos, neg)), -1.0);
}

} // namespace cpbigan::diff
