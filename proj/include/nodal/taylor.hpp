#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace nodal {

/// Truncated multivariate Taylor polynomial in `NV` variables up to total
/// order `K`. Coefficients are stored per multi-index in graded order, so
/// `coeff(alpha)` is d^alpha f / alpha! at the expansion point.
template <int NV, int K>
class Taylor {
  public:
    using Index = std::array<int, NV>;

    static constexpr int count() {
        // C(NV + K, K)
        long long r = 1;
        for (int i = 1; i <= K; ++i) r = r * (NV + i) / i;
        return static_cast<int>(r);
    }
    static constexpr int kSize = count();

    Taylor() { c_.fill(0.0); }
    explicit Taylor(double constant) {
        c_.fill(0.0);
        c_[0] = constant;
    }

    /// The expansion of the coordinate x_var around `at`.
    static Taylor variable(int var, double at) {
        Taylor t(at);
        if constexpr (K >= 1) t.c_[1 + var] = 1.0;
        return t;
    }

    double value() const { return c_[0]; }
    double& operator[](int i) { return c_[i]; }
    double operator[](int i) const { return c_[i]; }

    static const std::vector<Index>& indices() { return tables().idx; }
    static int index_of(const Index& a) {
        const auto& t = tables();
        for (int i = 0; i < kSize; ++i)
            if (t.idx[i] == a) return i;
        return -1;
    }

    double coeff(const Index& a) const {
        int i = index_of(a);
        return i < 0 ? 0.0 : c_[i];
    }

    /// Partial derivative d^alpha at the expansion point.
    double derivative(const Index& a) const {
        double f = 1.0;
        for (int v = 0; v < NV; ++v)
            for (int k = 2; k <= a[v]; ++k) f *= k;
        return coeff(a) * f;
    }

    Taylor& operator+=(const Taylor& o) {
        for (int i = 0; i < kSize; ++i) c_[i] += o.c_[i];
        return *this;
    }
    Taylor& operator-=(const Taylor& o) {
        for (int i = 0; i < kSize; ++i) c_[i] -= o.c_[i];
        return *this;
    }
    Taylor& operator*=(double s) {
        for (auto& x : c_) x *= s;
        return *this;
    }
    /// this += s * o
    void axpy(double s, const Taylor& o) {
        for (int i = 0; i < kSize; ++i) c_[i] += s * o.c_[i];
    }

    friend Taylor operator+(Taylor a, const Taylor& b) { return a += b; }
    friend Taylor operator-(Taylor a, const Taylor& b) { return a -= b; }
    friend Taylor operator*(Taylor a, double s) { return a *= s; }
    friend Taylor operator*(double s, Taylor a) { return a *= s; }
    friend Taylor operator-(Taylor a) { return a *= -1.0; }

    friend Taylor operator*(const Taylor& a, const Taylor& b) {
        Taylor r;
        for (const auto& [i, j, k] : tables().products) r.c_[k] += a.c_[i] * b.c_[j];
        return r;
    }

    /// Multiply by (x0 + dx_var): a linear factor, O(size).
    Taylor times_linear(int var, double x0) const {
        Taylor r;
        const auto& shift = tables().shift[var];
        for (int i = 0; i < kSize; ++i) {
            r.c_[i] += x0 * c_[i];
            if (shift[i] >= 0) r.c_[shift[i]] += c_[i];
        }
        return r;
    }

    /// Compose a smooth univariate function g with this series, given the
    /// Taylor coefficients g^(k)(v0)/k!, k = 0..K, at v0 = value().
    Taylor compose(const std::array<double, K + 1>& g) const {
        Taylor d = *this;
        d.c_[0] = 0.0;
        Taylor r(g[0]);
        Taylor p(1.0);
        for (int k = 1; k <= K; ++k) {
            p = p * d;
            r.axpy(g[k], p);
        }
        return r;
    }

    friend Taylor sqrt(const Taylor& a) {
        const double v = a.value();
        std::array<double, K + 1> g{};
        // binomial series of (v + t)^{1/2}
        double coef = std::sqrt(v);
        g[0] = coef;
        for (int k = 1; k <= K; ++k) {
            coef *= (0.5 - (k - 1)) / (k * v);
            g[k] = coef;
        }
        return a.compose(g);
    }

  private:
    struct Tables {
        std::vector<Index> idx;
        std::vector<std::array<int, 3>> products;
        std::array<std::vector<int>, NV> shift;
    };

    static int order(const Index& a) {
        int s = 0;
        for (int v : a) s += v;
        return s;
    }

    static const Tables& tables() {
        static const Tables t = [] {
            Tables t;
            // graded enumeration
            for (int ord = 0; ord <= K; ++ord) {
                Index a{};
                enumerate(a, 0, ord, t.idx);
            }
            auto find = [&](const Index& a) {
                for (std::size_t i = 0; i < t.idx.size(); ++i)
                    if (t.idx[i] == a) return static_cast<int>(i);
                return -1;
            };
            for (int i = 0; i < kSize; ++i)
                for (int j = 0; j < kSize; ++j) {
                    Index s{};
                    for (int v = 0; v < NV; ++v) s[v] = t.idx[i][v] + t.idx[j][v];
                    if (order(s) <= K) t.products.push_back({i, j, find(s)});
                }
            for (int v = 0; v < NV; ++v) {
                t.shift[v].assign(kSize, -1);
                for (int i = 0; i < kSize; ++i) {
                    Index s = t.idx[i];
                    s[v] += 1;
                    if (order(s) <= K) t.shift[v][i] = find(s);
                }
            }
            return t;
        }();
        return t;
    }

    static void enumerate(Index& a, int var, int remaining, std::vector<Index>& out) {
        if (var == NV - 1) {
            a[var] = remaining;
            out.push_back(a);
            return;
        }
        for (int k = remaining; k >= 0; --k) {
            a[var] = k;
            enumerate(a, var + 1, remaining - k, out);
        }
    }

    std::array<double, kSize> c_;
};

}  // namespace nodal
