#include "riskmdp/linalg.hpp"

#include <stdexcept>

namespace riskmdp {

std::vector<Rat> solve_linear_system(std::vector<std::vector<Rat>> a, std::vector<Rat> b) {
    const int n = static_cast<int>(a.size());
    if (n == 0) return {};

    // clear denominators row-wise; the system is equivalent
    std::vector<std::vector<mpz_class>> m(n, std::vector<mpz_class>(n + 1));
    for (int i = 0; i < n; ++i) {
        mpz_class lcm = 1;
        for (int j = 0; j < n; ++j) mpz_lcm(lcm.get_mpz_t(), lcm.get_mpz_t(), a[i][j].get_den().get_mpz_t());
        mpz_lcm(lcm.get_mpz_t(), lcm.get_mpz_t(), b[i].get_den().get_mpz_t());
        for (int j = 0; j < n; ++j) {
            Rat scaled = a[i][j] * Rat(lcm);
            m[i][j] = scaled.get_num();
        }
        Rat scaled = b[i] * Rat(lcm);
        m[i][n] = scaled.get_num();
    }

    mpz_class prev = 1;
    for (int k = 0; k < n; ++k) {
        int pivot = -1;
        mpz_class best = 0;
        for (int i = k; i < n; ++i) {
            mpz_class mag = abs(m[i][k]);
            if (mag > best) {
                best = mag;
                pivot = i;
            }
        }
        if (pivot < 0) throw std::runtime_error("singular linear system");
        std::swap(m[k], m[pivot]);
        for (int i = k + 1; i < n; ++i) {
            for (int j = k + 1; j <= n; ++j) {
                mpz_class num = m[k][k] * m[i][j] - m[i][k] * m[k][j];
                mpz_divexact(m[i][j].get_mpz_t(), num.get_mpz_t(), prev.get_mpz_t());
            }
            m[i][k] = 0;
        }
        prev = m[k][k];
    }

    std::vector<Rat> x(n);
    for (int i = n - 1; i >= 0; --i) {
        Rat rhs(m[i][n]);
        for (int j = i + 1; j < n; ++j) rhs -= Rat(m[i][j]) * x[j];
        x[i] = rhs / Rat(m[i][i]);
        x[i].canonicalize();
    }
    return x;
}

}  // namespace riskmdp
