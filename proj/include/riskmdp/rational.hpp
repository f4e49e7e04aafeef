#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace riskmdp {

/// Exact arbitrary-precision rational. All probabilities, rewards and
/// derived values in the library use this type; doubles appear only in
/// explicitly float-valued code paths (value iteration, simulation stats).
using Rat = mpq_class;

inline Rat rat(long num, long den = 1) {
    if (den == 0) throw std::invalid_argument("rational with zero denominator");
    Rat r(num, den);
    r.canonicalize();
    return r;
}

inline bool rat_is_integer(const Rat& r) { return r.get_den() == 1; }

inline Rat rat_floor(const Rat& r) {
    mpz_class q;
    mpz_fdiv_q(q.get_mpz_t(), r.get_num().get_mpz_t(), r.get_den().get_mpz_t());
    return Rat(q);
}

inline Rat rat_ceil(const Rat& r) {
    mpz_class q;
    mpz_cdiv_q(q.get_mpz_t(), r.get_num().get_mpz_t(), r.get_den().get_mpz_t());
    return Rat(q);
}

inline long rat_ceil_long(const Rat& r) {
    Rat c = rat_ceil(r);
    if (!c.get_num().fits_slong_p()) throw std::overflow_error("ceil out of long range");
    return c.get_num().get_si();
}

inline Rat rat_abs(const Rat& r) { return r < 0 ? Rat(-r) : r; }

/// Lowest-terms "p/q" rendering; integers print without the "/1".
inline std::string rat_to_string(const Rat& r) {
    if (rat_is_integer(r)) return r.get_num().get_str();
    return r.get_num().get_str() + "/" + r.get_den().get_str();
}

inline double rat_to_double(const Rat& r) { return r.get_d(); }

/// Parses "p/q", integer, or decimal literals ("0.25" becomes 1/4 exactly).
/// Returns nullopt on malformed input.
std::optional<Rat> parse_rational(const std::string& text);

}  // namespace riskmdp
