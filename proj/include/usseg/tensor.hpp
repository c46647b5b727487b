#ifndef USSEG_TENSOR_HPP
#define USSEG_TENSOR_HPP

#include <array>
#include <cstddef>
#include <vector>

namespace usseg {

// Dense (N, C, D, H, W) tensor, W-fastest. Instantiated for float
// (training/inference) and double (gradient checking).
template <typename T>
struct TensorT {
    int n = 0, c = 0, d = 0, h = 0, w = 0;
    std::vector<T> data;

    TensorT() = default;
    TensorT(int n_, int c_, int d_, int h_, int w_)
        : n(n_), c(c_), d(d_), h(h_), w(w_),
          data(static_cast<size_t>(n_) * c_ * d_ * h_ * w_, T(0)) {}

    size_t size() const { return data.size(); }
    size_t plane() const { return static_cast<size_t>(d) * h * w; }

    size_t idx(int in, int ic, int iz, int iy, int ix) const {
        return (((static_cast<size_t>(in) * c + ic) * d + iz) * h + iy) * w + ix;
    }
    T& at(int in, int ic, int iz, int iy, int ix) { return data[idx(in, ic, iz, iy, ix)]; }
    T at(int in, int ic, int iz, int iy, int ix) const { return data[idx(in, ic, iz, iy, ix)]; }

    std::array<int, 3> spatial() const { return {d, h, w}; }
    bool same_shape(const TensorT& o) const {
        return n == o.n && c == o.c && d == o.d && h == o.h && w == o.w;
    }
};

using Tensor = TensorT<float>;

} // namespace usseg

#endif
