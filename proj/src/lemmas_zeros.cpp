#include "nodal/lemmas.hpp"

#include <algorithm>
#include <cmath>

namespace nodal {

namespace {

constexpr double kPi = 3.14159265358979323846;

int sgn(double x) { return x > 0 ? 1 : (x < 0 ? -1 : 0); }

class ZeroScan {
  public:
    ZeroScan(const GeneralExpSum& S, int rounds, ZeroCount& out) : S_(S), rounds_(rounds), out_(out) {
        real_ = S.is_real();
    }

    void run(double lo, double hi, int n) {
        std::vector<double> xs(n + 1), gs(n + 1);
        scale_ = 0.0;
        for (int i = 0; i <= n; ++i) {
            xs[i] = lo + (hi - lo) * i / n;
            const cplx v = S_(xs[i]);
            gs[i] = v.real();
            scale_ = std::max(scale_, std::abs(v));
        }
        if (scale_ == 0.0) throw DomainError("exponential sum vanishes on the interval");
        tol_ = 1e-10 * scale_;
        scan(xs, gs, 0);
    }

  private:
    bool accept(double x) const { return real_ || std::abs(S_(x).imag()) <= 1e-8 * scale_; }

    void add(double x) {
        if (accept(x)) out_.locations.push_back(x);
    }

    double bisect(double a, double b, double ga) const {
        for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a)); ++it) {
            const double m = 0.5 * (a + b);
            const double gm = S_(m).real();
            if (gm == 0.0) return m;
            if (sgn(gm) == sgn(ga)) {
                a = m;
                ga = gm;
            } else {
                b = m;
            }
        }
        return 0.5 * (a + b);
    }

    void scan(const std::vector<double>& xs, const std::vector<double>& gs, int depth) {
        const int n = static_cast<int>(xs.size());
        int i = 0;
        while (i < n) {
            if (std::abs(gs[i]) <= tol_) {
                const int s = i;
                while (i < n && std::abs(gs[i]) <= tol_) ++i;
                add(0.5 * (xs[s] + xs[i - 1]));
                continue;
            }
            if (i + 1 < n && std::abs(gs[i + 1]) > tol_ && sgn(gs[i]) != sgn(gs[i + 1])) {
                add(bisect(xs[i], xs[i + 1], gs[i]));
            } else if (i > 0 && i + 1 < n && std::abs(gs[i - 1]) > tol_ && std::abs(gs[i + 1]) > tol_ &&
                       sgn(gs[i - 1]) == sgn(gs[i]) && sgn(gs[i + 1]) == sgn(gs[i]) &&
                       std::abs(gs[i]) < std::abs(gs[i - 1]) && std::abs(gs[i]) <= std::abs(gs[i + 1]) &&
                       std::abs(gs[i]) < 0.05 * scale_) {
                // a pair of roots may hide in the cells around a small local minimum
                if (depth < rounds_) {
                    const int m = 100;
                    std::vector<double> fx(m + 1), fg(m + 1);
                    for (int k = 0; k <= m; ++k) {
                        fx[k] = xs[i - 1] + (xs[i + 1] - xs[i - 1]) * k / m;
                        fg[k] = S_(fx[k]).real();
                    }
                    scan(fx, fg, depth + 1);
                } else if (std::abs(gs[i]) < 1e-6 * scale_) {
                    out_.resolution_exhausted = true;
                }
            }
            ++i;
        }
    }

    const GeneralExpSum& S_;
    int rounds_;
    ZeroCount& out_;
    bool real_ = true;
    double scale_ = 0.0, tol_ = 0.0;
};

double max_abs(const GeneralExpSum& S, double lo, double hi, int samples) {
    double m = 0.0;
    for (int i = 0; i <= samples; ++i) m = std::max(m, std::abs(S(lo + (hi - lo) * i / samples)));
    return m;
}

}  // namespace

ZeroCount langer_zero_count(const GeneralExpSum& S, double lo, double hi, int subdivisions, int refinement_rounds) {
    if (!(hi > lo)) throw InvalidSpec("interval must have positive length");
    if (subdivisions < 2 || refinement_rounds < 0) throw InvalidSpec("bad subdivision parameters");
    const int N = S.degree();
    if (N == 0) throw InvalidSpec("exponential sum is trivial");
    ZeroCount z;
    z.bound = (N - 1) + S.spread() * (hi - lo) / (2.0 * kPi);
    ZeroScan(S, refinement_rounds, z).run(lo, hi, subdivisions);
    std::sort(z.locations.begin(), z.locations.end());
    z.zeros = static_cast<int>(z.locations.size());
    z.ok = z.zeros <= z.bound + 1e-9;
    return z;
}

double turan_constant(const GeneralExpSum& S, double I_lo, double I_hi, double J_lo, double J_hi, int samples) {
    if (!(J_lo <= I_lo && I_lo < I_hi && I_hi <= J_hi)) throw InvalidSpec("need nested intervals I within J");
    const int N = S.degree();
    if (N < 2) throw InvalidSpec("Turan comparison needs degree at least 2");
    const double mI = max_abs(S, I_lo, I_hi, samples);
    const double mJ = std::max(mI, max_abs(S, J_lo, J_hi, samples));  // I is sampled more finely
    if (mI == 0.0) return std::numeric_limits<double>::infinity();
    return std::pow(mJ / mI, 1.0 / (N - 1)) * (I_hi - I_lo) / (J_hi - J_lo);
}

}  // namespace nodal
