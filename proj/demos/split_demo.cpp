// Splits Tr((X/sqrt N)^k) into its distinct-pair part and the rest, and
// compares Monte Carlo variances with the exact ones.

#include <cstdio>

#include "tracefluct/tracefluct.hpp"

namespace tf = tracefluct;

int main() {
    const auto dist = tf::make_distribution("two_point(0.2)");
    const int k = 3;
    const std::size_t M = 20000;
    std::printf("%4s %12s %12s %12s %12s\n", "N", "var_d(mc)", "var_d", "var_rem(mc)", "var_rem");
    for (int N : {4, 6, 8}) {
        const tf::DPartExtractor ex(N, k);
        const double mean = tf::expected_trace(dist, N, k);
        std::vector<double> d(M);
        std::vector<double> r(M);
        tf::MatrixSample s;
        for (std::size_t t = 0; t < M; ++t) {
            tf::sample_matrix_into(dist, N, 7, t, s);
            const double tr = tf::trace_power(s, k);
            d[t] = ex.d_part(s, tr);
            r[t] = tr - d[t] - mean;
        }
        std::printf("%4d %12.5f %12.5f %12.5f %12.5f\n", N, tf::summarize(d).variance,
                    tf::exact_variance(dist, N, k, tf::VariancePart::d_part), tf::summarize(r).variance,
                    tf::exact_variance(dist, N, k, tf::VariancePart::remainder));
    }
}
