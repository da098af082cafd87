#include "tmq/quadrature.hpp"

#include <array>
#include <queue>
#include <stdexcept>

namespace tmq {

namespace {

// Kronrod nodes on [0, 1] (symmetric); odd indices are the Gauss nodes.
constexpr std::array<double, 8> kNodes{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851, 0.864864423359769072789712788640926,
    0.741531185599394439863864773280788, 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
};
constexpr std::array<double, 8> kKronrodWeights{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204, 0.104790010322250183839876322541518,
    0.140653259715525918745189590510238, 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
};
constexpr std::array<double, 4> kGaussWeights{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780, 0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
};

struct Segment {
    double a, b;
    Eigen::ArrayXd value;
    double error;
    bool operator<(const Segment& o) const { return error < o.error; }
};

Segment evaluate(const VectorIntegrand& f, double a, double b, int& evals) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    Eigen::ArrayXd fc = f(c);
    Eigen::ArrayXd kronrod = kKronrodWeights[7] * fc;
    Eigen::ArrayXd gauss = kGaussWeights[3] * fc;
    for (int i = 0; i < 7; ++i) {
        const double dx = h * kNodes[i];
        Eigen::ArrayXd sum = f(c - dx) + f(c + dx);
        kronrod += kKronrodWeights[i] * sum;
        if (i % 2 == 1) gauss += kGaussWeights[i / 2] * sum;
    }
    evals += 15;
    Segment s{a, b, h * kronrod, 0.0};
    s.error = (h * (kronrod - gauss)).abs().maxCoeff();
    return s;
}

}  // namespace

QuadratureResult integrate_gk15(const VectorIntegrand& f, double a, double b, const QuadratureOptions& opts) {
    int evals = 0;
    std::priority_queue<Segment> heap;
    heap.push(evaluate(f, a, b, evals));
    Eigen::ArrayXd total = heap.top().value;
    double error = heap.top().error;
    int splits = 0;
    while (error > std::max(opts.abs_tol, opts.rel_tol * total.abs().maxCoeff())) {
        if (++splits > opts.max_subdivisions) throw std::runtime_error("adaptive quadrature did not converge");
        Segment worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        Segment left = evaluate(f, worst.a, mid, evals);
        Segment right = evaluate(f, mid, worst.b, evals);
        total += left.value + right.value - worst.value;
        heap.push(std::move(left));
        heap.push(std::move(right));
        // Recompute the aggregate error from scratch to avoid drift.
        error = 0.0;
        auto copy = heap;
        while (!copy.empty()) {
            error += copy.top().error;
            copy.pop();
        }
    }
    return {total, error, evals};
}

double integrate_gk15(const std::function<double(double)>& f, double a, double b, const QuadratureOptions& opts) {
    auto vec = [&](double x) {
        Eigen::ArrayXd v(1);
        v[0] = f(x);
        return v;
    };
    return integrate_gk15(vec, a, b, opts).value[0];
}

}  // namespace tmq
