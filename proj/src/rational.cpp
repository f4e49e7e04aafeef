#include "riskmdp/rational.hpp"

#include <cctype>

namespace riskmdp {

namespace {

bool all_digits(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

}  // namespace

std::optional<Rat> parse_rational(const std::string& text) {
    std::string s = text;
    bool negative = false;
    if (!s.empty() && (s[0] == '+' || s[0] == '-')) {
        negative = s[0] == '-';
        s = s.substr(1);
    }
    if (s.empty()) return std::nullopt;

    Rat value;
    auto slash = s.find('/');
    auto dot = s.find('.');
    if (slash != std::string::npos) {
        if (dot != std::string::npos) return std::nullopt;
        std::string num = s.substr(0, slash), den = s.substr(slash + 1);
        if (!all_digits(num) || !all_digits(den)) return std::nullopt;
        mpz_class n(num), d(den);
        if (d == 0) return std::nullopt;
        value = Rat(n) / Rat(d);
    } else if (dot != std::string::npos) {
        std::string whole = s.substr(0, dot), frac = s.substr(dot + 1);
        if (whole.empty()) whole = "0";
        if (!all_digits(whole) || (!frac.empty() && !all_digits(frac))) return std::nullopt;
        mpz_class scale = 1;
        for (size_t i = 0; i < frac.size(); ++i) scale *= 10;
        mpz_class n = mpz_class(whole) * scale + (frac.empty() ? mpz_class(0) : mpz_class(frac));
        value = Rat(n) / Rat(scale);
    } else {
        if (!all_digits(s)) return std::nullopt;
        value = Rat(mpz_class(s));
    }
    value.canonicalize();
    if (negative) value = -value;
    return value;
}

}  // namespace riskmdp
