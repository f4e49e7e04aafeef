#include "riskmdp/lp_text.hpp"

#include <map>
#include <sstream>
#include <stdexcept>

namespace riskmdp {

bool TextProgram::operator==(const TextProgram& other) const {
    auto ceq = [](const Constraint& a, const Constraint& b) {
        return a.name == b.name && a.terms == b.terms && a.rel == b.rel && a.rhs == b.rhs;
    };
    if (kind != other.kind || header != other.header || objective_linear != other.objective_linear ||
        objective_bilinear != other.objective_bilinear || constraints.size() != other.constraints.size())
        return false;
    for (size_t i = 0; i < constraints.size(); ++i)
        if (!ceq(constraints[i], other.constraints[i])) return false;
    return true;
}

namespace {

void append_term(std::ostringstream& out, bool& first, const Rat& coeff, const std::string& body) {
    if (coeff == 0) return;
    Rat mag = rat_abs(coeff);
    if (first) {
        if (coeff < 0) out << "-";
        first = false;
    } else {
        out << (coeff < 0 ? " - " : " + ");
    }
    if (mag != 1 || body.empty()) {
        out << rat_to_string(mag);
        if (!body.empty()) out << " ";
    }
    out << body;
}

}  // namespace

std::string write_program(const TextProgram& p) {
    std::ostringstream out;
    out << "\\ riskmdp " << p.kind << " v1 ";
    for (const auto& [k, v] : p.header) out << " " << k << "=" << v;
    out << "\n";
    out << "maximize: ";
    bool first = true;
    for (const auto& [c, v] : p.objective_linear) append_term(out, first, c, v);
    for (const auto& [c, a, b] : p.objective_bilinear) append_term(out, first, c, a + " * " + b);
    if (first) out << "0";
    out << "\n";
    out << "subject to:\n";
    for (const auto& c : p.constraints) {
        out << c.name << ": ";
        bool f = true;
        for (const auto& [coeff, v] : c.terms) append_term(out, f, coeff, v);
        if (c.rhs != 0) append_term(out, f, -c.rhs, "");
        if (f) out << "0";
        out << (c.rel == Relation::eq ? " = 0" : c.rel == Relation::le ? " <= 0" : " >= 0");
        out << "\n";
    }
    out << "bounds: all >= 0\n";
    out << "end\n";
    return out.str();
}

namespace {

struct TermList {
    std::vector<std::pair<Rat, std::string>> linear;
    std::vector<std::tuple<Rat, std::string, std::string>> bilinear;
    Rat constant;
};

/// Parses "e - 2/5 x * g + 3 - h" style expressions.
TermList parse_terms(const std::string& text, int lineno) {
    TermList result;
    result.constant = 0;
    std::istringstream in(text);
    std::vector<std::string> toks;
    std::string tok;
    while (in >> tok) toks.push_back(tok);

    size_t i = 0;
    bool first = true;
    while (i < toks.size()) {
        Rat sign(1);
        if (toks[i] == "+" || toks[i] == "-") {
            if (toks[i] == "-") sign = -1;
            ++i;
        } else if (!first) {
            throw std::invalid_argument("line " + std::to_string(lineno) + ": expected +/- between terms");
        }
        first = false;
        if (i >= toks.size()) throw std::invalid_argument("line " + std::to_string(lineno) + ": dangling sign");

        Rat coeff(1);
        bool have_coeff = false;
        std::string head = toks[i];
        // a '-' glued to the leading token
        if (!head.empty() && head[0] == '-') {
            sign = -sign;
            head = head.substr(1);
        }
        std::string var1, var2;
        if (auto r = parse_rational(head)) {
            coeff = *r;
            have_coeff = true;
            ++i;
        } else {
            var1 = head;
            ++i;
        }
        if (var1.empty() && i < toks.size() && toks[i] != "+" && toks[i] != "-" && toks[i] != "*") {
            var1 = toks[i];
            ++i;
        }
        if (!var1.empty() && i < toks.size() && toks[i] == "*") {
            ++i;
            if (i >= toks.size()) throw std::invalid_argument("line " + std::to_string(lineno) + ": dangling '*'");
            var2 = toks[i];
            ++i;
        }
        if (var1.empty()) {
            if (!have_coeff)
                throw std::invalid_argument("line " + std::to_string(lineno) + ": empty term");
            result.constant += sign * coeff;
        } else if (var2.empty()) {
            result.linear.emplace_back(sign * coeff, var1);
        } else {
            result.bilinear.emplace_back(sign * coeff, var1, var2);
        }
    }
    return result;
}

}  // namespace

TextProgram parse_program(const std::string& text) {
    TextProgram p;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    enum { head, objective, body, done } section = head;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '\\') {
            std::istringstream h(line.substr(1));
            std::string word;
            std::vector<std::string> words;
            while (h >> word) words.push_back(word);
            if (words.size() >= 2 && words[0] == "riskmdp") p.kind = words[1];
            for (size_t i = 2; i < words.size(); ++i) {
                auto eq = words[i].find('=');
                if (eq != std::string::npos)
                    p.header.emplace_back(words[i].substr(0, eq), words[i].substr(eq + 1));
            }
            continue;
        }
        if (line.rfind("maximize:", 0) == 0) {
            auto terms = parse_terms(line.substr(9), lineno);
            if (terms.constant != 0)
                throw std::invalid_argument("line " + std::to_string(lineno) + ": constant in objective");
            p.objective_linear = std::move(terms.linear);
            p.objective_bilinear = std::move(terms.bilinear);
            section = objective;
            continue;
        }
        if (line.rfind("subject to:", 0) == 0) {
            section = body;
            continue;
        }
        if (line.rfind("bounds:", 0) == 0) {
            std::string b = line.substr(7);
            if (b.find("all >= 0") == std::string::npos)
                throw std::invalid_argument("line " + std::to_string(lineno) + ": unsupported bounds clause");
            continue;
        }
        if (line.rfind("end", 0) == 0) {
            section = done;
            break;
        }
        if (section != body)
            throw std::invalid_argument("line " + std::to_string(lineno) + ": unexpected content");

        auto colon = line.find(':');
        if (colon == std::string::npos)
            throw std::invalid_argument("line " + std::to_string(lineno) + ": constraint without name");
        TextProgram::Constraint c;
        c.name = line.substr(0, colon);
        std::string rest = line.substr(colon + 1);
        Relation rel;
        size_t relpos;
        if ((relpos = rest.find(" <= ")) != std::string::npos)
            rel = Relation::le;
        else if ((relpos = rest.find(" >= ")) != std::string::npos)
            rel = Relation::ge;
        else if ((relpos = rest.find(" = ")) != std::string::npos)
            rel = Relation::eq;
        else
            throw std::invalid_argument("line " + std::to_string(lineno) + ": missing relation");
        std::string lhs = rest.substr(0, relpos);
        std::string rhs_text = rest.substr(relpos);
        rhs_text = rhs_text.substr(rhs_text.find_first_of("=<>") + (rel == Relation::eq ? 1 : 2));
        auto rhs = parse_rational(rhs_text.substr(rhs_text.find_first_not_of(' ')));
        if (!rhs) throw std::invalid_argument("line " + std::to_string(lineno) + ": malformed rhs");
        auto terms = parse_terms(lhs, lineno);
        if (!terms.bilinear.empty())
            throw std::invalid_argument("line " + std::to_string(lineno) + ": bilinear term in constraint");
        c.terms = std::move(terms.linear);
        c.rel = rel;
        c.rhs = *rhs - terms.constant;
        p.constraints.push_back(std::move(c));
    }
    if (section == head) throw std::invalid_argument("missing 'maximize:' section");
    return p;
}

TextProgram lp_to_text(const LpProblem& p) {
    TextProgram t;
    t.kind = "lp";
    for (int j = 0; j < static_cast<int>(p.var_names.size()); ++j)
        if (p.objective[j] != 0) t.objective_linear.emplace_back(p.objective[j], p.var_names[j]);
    int idx = 0;
    for (const auto& r : p.rows) {
        TextProgram::Constraint c;
        c.name = r.name.empty() ? "c" + std::to_string(++idx) : r.name;
        for (const auto& [v, coeff] : r.terms) c.terms.emplace_back(coeff, p.var_names[v]);
        c.rel = r.rel;
        c.rhs = r.rhs;
        t.constraints.push_back(std::move(c));
    }
    return t;
}

LpProblem lp_from_text(const TextProgram& t) {
    if (!t.objective_bilinear.empty())
        throw std::invalid_argument("program has a quadratic objective; the LP solver takes linear ones");
    LpProblem p;
    std::map<std::string, int> index;
    auto var = [&](const std::string& name) {
        auto it = index.find(name);
        if (it != index.end()) return it->second;
        int id = p.add_var(name);
        index[name] = id;
        return id;
    };
    for (const auto& [c, v] : t.objective_linear) p.objective[var(v)] += c;
    for (const auto& c : t.constraints) {
        std::vector<std::pair<int, Rat>> terms;
        for (const auto& [coeff, v] : c.terms) terms.emplace_back(var(v), coeff);
        p.add_row(c.name, std::move(terms), c.rel, c.rhs);
    }
    return p;
}

}  // namespace riskmdp
