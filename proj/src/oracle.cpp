#include "riskmdp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

#include "riskmdp/errors.hpp"
#include "riskmdp/expect.hpp"
#include "riskmdp/parallel.hpp"

namespace riskmdp {

RewardDistribution enumerate_paths(const Mdp& m, const Scheduler& sched, long max_paths, long max_depth) {
    struct Frame {
        int state;
        Rat reward;
        Rat prob;
        long depth;
    };
    std::vector<Frame> stack;
    stack.push_back({m.initial, Rat(0), Rat(1), 0});
    std::map<Rat, Rat> atoms;
    Rat tail(0);
    long paths = 0;

    while (!stack.empty()) {
        Frame f = std::move(stack.back());
        stack.pop_back();
        if (m.is_trap(f.state)) {
            atoms[f.reward] += f.prob;
            if (++paths > max_paths) throw BudgetExceeded("path enumeration exceeded the path budget");
            continue;
        }
        if (f.depth >= max_depth) {
            tail += f.prob;
            continue;
        }
        for (const auto& ap : sched.distribution_at(m, f.state, f.reward)) {
            if (ap.prob == 0) continue;
            const ActionChoice* c = m.choice_for(f.state, ap.action);
            if (!c)
                throw ModelError(ModelErrorKind::scheduler,
                                 "scheduler picks disabled action at '" + m.state_names[f.state] + "'");
            for (const auto& t : c->successors)
                stack.push_back({t.target, f.reward + c->reward, f.prob * ap.prob * t.prob, f.depth + 1});
        }
    }
    return RewardDistribution::from_map(atoms, tail);
}

namespace {

using i128 = __int128;

struct DecisionPoint {
    int state;
    long w = 0;           // reward level (reward-based only)
    bool leveled = false;  // pair carries a reward level
    std::vector<int> actions;  // sorted by action name
};

/// All length-d vectors of non-negative numerators summing to G, in
/// lexicographic order.
void compositions(long g, int d, std::vector<long>& prefix, std::vector<std::vector<long>>& out) {
    if (d == 1) {
        prefix.push_back(g);
        out.push_back(prefix);
        prefix.pop_back();
        return;
    }
    for (long i = 0; i <= g; ++i) {
        prefix.push_back(i);
        compositions(g - i, d - 1, prefix, out);
        prefix.pop_back();
    }
}

/// Local exact objective evaluation on (value, prob) vectors; the oracle
/// keeps its own copy of these formulas on purpose.
Rat eval_objective(const PenaltySpec& spec, const std::vector<Rat>& values, const std::vector<Rat>& probs) {
    Rat e(0);
    for (size_t i = 0; i < values.size(); ++i) e += probs[i] * values[i];
    Rat pen(0);
    switch (spec.kind) {
        case PenaltyKind::madpe:
            for (size_t i = 0; i < values.size(); ++i) pen += probs[i] * rat_abs(values[i] - e);
            break;
        case PenaltyKind::smadpe:
            for (size_t i = 0; i < values.size(); ++i)
                if (values[i] < e) pen += probs[i] * (e - values[i]);
            break;
        case PenaltyKind::vpe:
            for (size_t i = 0; i < values.size(); ++i) pen += probs[i] * (values[i] - e) * (values[i] - e);
            break;
        case PenaltyKind::svpe:
            for (size_t i = 0; i < values.size(); ++i)
                if (values[i] < e) pen += probs[i] * (values[i] - e) * (values[i] - e);
            break;
        case PenaltyKind::tbpe:
            for (size_t i = 0; i < values.size(); ++i)
                if (values[i] < *spec.threshold) pen += probs[i] * (*spec.threshold - values[i]);
            break;
    }
    return e - spec.lambda * pen;
}

/// Fixed-denominator integer evaluation of the same objectives. All grid
/// points share the denominators, so numerators compare directly. The
/// caller has verified via the mpz bound below that nothing overflows.
struct FixedEval {
    PenaltyKind kind;
    long lnum, lden;        // lambda
    long tnum = 0;          // tbpe threshold scaled by lv
    std::vector<long> vnum;  // values scaled by lv
    long lv;                 // value denominator
    i128 dm;                 // atom probability denominator

    i128 value_numerator(const std::vector<i128>& anum) const {
        i128 e = 0;
        for (size_t i = 0; i < vnum.size(); ++i) e += anum[i] * vnum[i];  // over dm*lv
        i128 pen = 0;                                                     // denominator depends on kind
        switch (kind) {
            case PenaltyKind::madpe:
                for (size_t i = 0; i < vnum.size(); ++i) {
                    i128 dev = vnum[i] * dm - e;
                    pen += anum[i] * (dev < 0 ? -dev : dev);
                }
                return e * (i128)lden * dm - (i128)lnum * pen;  // over lden*dm^2*lv
            case PenaltyKind::smadpe:
                for (size_t i = 0; i < vnum.size(); ++i) {
                    i128 dev = vnum[i] * dm - e;
                    if (dev < 0) pen += anum[i] * (-dev);
                }
                return e * (i128)lden * dm - (i128)lnum * pen;
            case PenaltyKind::vpe:
                for (size_t i = 0; i < vnum.size(); ++i) {
                    i128 dev = vnum[i] * dm - e;
                    pen += anum[i] * dev * dev;
                }
                return e * (i128)lden * dm * dm * (i128)lv - (i128)lnum * pen;  // over lden*dm^3*lv^2
            case PenaltyKind::svpe:
                for (size_t i = 0; i < vnum.size(); ++i) {
                    i128 dev = vnum[i] * dm - e;
                    if (dev < 0) pen += anum[i] * dev * dev;
                }
                return e * (i128)lden * dm * dm * (i128)lv - (i128)lnum * pen;
            case PenaltyKind::tbpe:
                for (size_t i = 0; i < vnum.size(); ++i)
                    if (vnum[i] < tnum) pen += anum[i] * (tnum - vnum[i]);
                return e * (i128)lden - (i128)lnum * pen;  // over lden*dm*lv
        }
        return 0;
    }

    Rat denominator() const {
        Rat dmr(mpz_from_i128(dm));
        switch (kind) {
            case PenaltyKind::vpe:
            case PenaltyKind::svpe:
                return Rat(lden) * dmr * dmr * dmr * Rat(lv) * Rat(lv);
            case PenaltyKind::tbpe:
                return Rat(lden) * dmr * Rat(lv);
            default:
                return Rat(lden) * dmr * dmr * Rat(lv);
        }
    }

    static mpz_class mpz_from_i128(i128 v) {
        bool neg = v < 0;
        unsigned __int128 u = neg ? -(unsigned __int128)v : (unsigned __int128)v;
        mpz_class hi(static_cast<unsigned long>(u >> 64));
        mpz_class out = (hi << 64) + mpz_class(static_cast<unsigned long>(u));
        return neg ? mpz_class(-out) : out;
    }
};

}  // namespace

GridResult grid_search(const Mdp& m, const GridSpec& spec, int jobs) {
    if (!m.acyclic())
        throw ModelError(ModelErrorKind::precondition,
                         "grid search needs an acyclic model (exact enumeration per grid point)");
    if (spec.resolution < 1) throw std::invalid_argument("grid resolution must be >= 1");
    if (spec.objective.kind == PenaltyKind::tbpe && !spec.objective.threshold)
        throw std::invalid_argument("tbpe objective needs a threshold");

    ValueTable tmax = optimal_expected_reward(m, Direction::max);

    // decision points in deterministic order
    std::vector<DecisionPoint> points;
    std::vector<std::pair<int, long>> fixed_pairs;  // single-action reachable pairs (reward-based)
    if (spec.sched_class == GridSpec::SchedClass::memoryless) {
        std::vector<int> states(m.state_count());
        for (int s = 0; s < m.state_count(); ++s) states[s] = s;
        std::sort(states.begin(), states.end(),
                  [&](int a, int b) { return m.state_names[a] < m.state_names[b]; });
        for (int s : states) {
            if (m.choices[s].size() < 2) continue;
            DecisionPoint p;
            p.state = s;
            for (const auto& c : m.choices[s]) p.actions.push_back(c.action);
            std::sort(p.actions.begin(), p.actions.end(),
                      [&](int a, int b) { return m.action_names[a] < m.action_names[b]; });
            points.push_back(std::move(p));
        }
    } else {
        // reachable (state, reward) pairs with reward <= bound
        std::set<std::pair<int, long>> seen;
        std::vector<std::pair<int, long>> work{{m.initial, 0}};
        seen.insert(work[0]);
        while (!work.empty()) {
            auto [s, w] = work.back();
            work.pop_back();
            for (const auto& c : m.choices[s]) {
                long v = w + c.reward.get_num().get_si();
                for (const auto& t : c.successors)
                    if (seen.insert({t.target, v}).second && v <= spec.reward_bound)
                        work.push_back({t.target, v});
            }
        }
        std::vector<std::pair<int, long>> pairs;
        for (const auto& [s, w] : seen)
            if (w <= spec.reward_bound && !m.is_trap(s)) pairs.push_back({s, w});
        std::sort(pairs.begin(), pairs.end(), [&](const auto& a, const auto& b) {
            return std::tie(m.state_names[a.first], a.second) < std::tie(m.state_names[b.first], b.second);
        });
        for (const auto& [s, w] : pairs) {
            if (m.choices[s].size() < 2) {
                fixed_pairs.push_back({s, w});
                continue;
            }
            DecisionPoint p;
            p.state = s;
            p.w = w;
            p.leveled = true;
            for (const auto& c : m.choices[s]) p.actions.push_back(c.action);
            std::sort(p.actions.begin(), p.actions.end(),
                      [&](int a, int b) { return m.action_names[a] < m.action_names[b]; });
            points.push_back(std::move(p));
        }
    }

    const int dp = static_cast<int>(points.size());
    // per-point composition tables and grid size (saturating multiply)
    std::vector<std::vector<std::vector<long>>> comps(dp);
    long total = 1;
    for (int i = 0; i < dp; ++i) {
        std::vector<long> prefix;
        compositions(spec.resolution, static_cast<int>(points[i].actions.size()), prefix, comps[i]);
        long size = static_cast<long>(comps[i].size());
        if (total > spec.budget / size)
            total = spec.budget + 1;
        else
            total *= size;
    }
    if (total > spec.budget)
        throw BudgetExceeded("grid has more than " + std::to_string(spec.budget) + " points");

    // scheduler assembly shared by profiles and the final result
    auto make_scheduler = [&](const std::vector<std::vector<Rat>>& probs) {
        Scheduler sched;
        if (spec.sched_class == GridSpec::SchedClass::memoryless) {
            MemorylessRandomized ml;
            for (int s = 0; s < m.state_count(); ++s)
                if (m.choices[s].size() == 1) ml.choice[s] = {ActionProb{m.choices[s][0].action, Rat(1)}};
            for (int i = 0; i < dp; ++i) {
                std::vector<ActionProb> d;
                for (size_t a = 0; a < points[i].actions.size(); ++a)
                    d.push_back({points[i].actions[a], probs[i][a]});
                ml.choice[points[i].state] = std::move(d);
            }
            sched.rule = std::move(ml);
        } else {
            RewardBasedRandomized rb;
            for (const auto& [s, w] : fixed_pairs) rb.choice[{s, w}] = {ActionProb{m.choices[s][0].action, Rat(1)}};
            for (int i = 0; i < dp; ++i) {
                std::vector<ActionProb> d;
                for (size_t a = 0; a < points[i].actions.size(); ++a)
                    d.push_back({points[i].actions[a], probs[i][a]});
                rb.choice[{points[i].state, points[i].w}] = std::move(d);
            }
            // above the bound the class follows the expectation-optimal policy
            for (const auto& [s, a] : tmax.policy) rb.choice[{s, spec.reward_bound + 1}] = {ActionProb{a, Rat(1)}};
            sched.rule = std::move(rb);
        }
        return sched;
    };

    // deterministic base profiles: one distribution per combination of pure
    // choices; every grid mixture is the multilinear blend of these
    long n_profiles = 1;
    for (int i = 0; i < dp; ++i) n_profiles *= static_cast<long>(points[i].actions.size());
    std::vector<std::vector<int>> profile_choice(n_profiles, std::vector<int>(dp));
    {
        std::vector<int> odo(dp, 0);
        for (long p = 0; p < n_profiles; ++p) {
            profile_choice[p] = odo;
            for (int i = dp - 1; i >= 0; --i) {
                if (++odo[i] < static_cast<int>(points[i].actions.size())) break;
                odo[i] = 0;
            }
        }
    }

    std::vector<Rat> support;
    std::vector<std::vector<Rat>> profile_probs(n_profiles);
    {
        std::set<Rat> values;
        std::vector<RewardDistribution> dists(n_profiles);
        for (long p = 0; p < n_profiles; ++p) {
            std::vector<std::vector<Rat>> probs(dp);
            for (int i = 0; i < dp; ++i) {
                probs[i].assign(points[i].actions.size(), Rat(0));
                probs[i][profile_choice[p][i]] = 1;
            }
            dists[p] = enumerate_paths(m, make_scheduler(probs));
            for (const auto& [v, q] : dists[p].atoms) values.insert(v);
        }
        support.assign(values.begin(), values.end());
        for (long p = 0; p < n_profiles; ++p) {
            profile_probs[p].assign(support.size(), Rat(0));
            for (const auto& [v, q] : dists[p].atoms) {
                size_t idx = std::lower_bound(support.begin(), support.end(), v) - support.begin();
                profile_probs[p][idx] = q;
            }
        }
    }

    const long g = spec.resolution;
    // fixed-denominator fast path when every quantity provably fits i128
    bool fast = true;
    mpz_class lv_z = 1, l_z = 1;
    for (const Rat& v : support) mpz_lcm(lv_z.get_mpz_t(), lv_z.get_mpz_t(), v.get_den().get_mpz_t());
    if (spec.objective.threshold)
        mpz_lcm(lv_z.get_mpz_t(), lv_z.get_mpz_t(), spec.objective.threshold->get_den().get_mpz_t());
    for (const auto& pp : profile_probs)
        for (const Rat& q : pp) mpz_lcm(l_z.get_mpz_t(), l_z.get_mpz_t(), q.get_den().get_mpz_t());
    mpz_class dw_z = 1;
    for (int i = 0; i < dp; ++i) dw_z *= g;
    mpz_class dm_z = dw_z * l_z;
    mpz_class vmax_z = 1;
    for (const Rat& v : support) {
        mpz_class scaled = v.get_num() * (lv_z / v.get_den());
        mpz_class mag = abs(scaled);
        if (mag > vmax_z) vmax_z = mag;
    }
    if (spec.objective.threshold) {
        mpz_class scaled = abs(spec.objective.threshold->get_num() * (lv_z / spec.objective.threshold->get_den()));
        if (scaled > vmax_z) vmax_z = scaled;
    }
    mpz_class lden_z = spec.objective.lambda.get_den(), lnum_z = abs(spec.objective.lambda.get_num());
    mpz_class bound;
    switch (spec.objective.kind) {
        case PenaltyKind::vpe:
        case PenaltyKind::svpe:
            bound = dm_z * dm_z * dm_z * vmax_z * (lden_z * lv_z * vmax_z + 4 * lnum_z * vmax_z * vmax_z);
            break;
        case PenaltyKind::tbpe:
            bound = dm_z * vmax_z * (lden_z + 2 * lnum_z) * 2;
            break;
        default:
            bound = dm_z * dm_z * vmax_z * (lden_z + 2 * lnum_z) * 2;
            break;
    }
    mpz_class limit = mpz_class(1) << 120;
    if (bound >= limit || !lden_z.fits_slong_p() || !lnum_z.fits_slong_p() || !lv_z.fits_slong_p()) fast = false;

    FixedEval fe;
    std::vector<std::vector<long>> pnum;  // per profile, per atom, over dm
    if (fast) {
        fe.kind = spec.objective.kind;
        fe.lnum = lnum_z.get_si() * (spec.objective.lambda < 0 ? -1 : 1);
        fe.lden = lden_z.get_si();
        fe.lv = lv_z.get_si();
        // dm fits well under 2^120 by the bound check; assemble it in limbs
        fe.dm = 0;
        mpz_class q = dm_z;
        std::vector<unsigned long> limbs;
        while (q != 0) {
            mpz_class lo = q & mpz_class(0xFFFFFFFFUL);
            limbs.push_back(lo.get_ui());
            q >>= 32;
        }
        for (auto it = limbs.rbegin(); it != limbs.rend(); ++it) fe.dm = (fe.dm << 32) | static_cast<i128>(*it);
        for (const Rat& v : support) {
            mpz_class scaled = v.get_num() * (lv_z / v.get_den());
            fe.vnum.push_back(scaled.get_si());
        }
        if (spec.objective.threshold) {
            mpz_class scaled =
                spec.objective.threshold->get_num() * (lv_z / spec.objective.threshold->get_den());
            fe.tnum = scaled.get_si();
        }
        pnum.resize(n_profiles);
        for (long p = 0; p < n_profiles; ++p)
            for (const Rat& q : profile_probs[p]) {
                Rat scaled = q * Rat(l_z);
                pnum[p].push_back(scaled.get_num().get_si());
            }
    }

    // mixed-radix enumeration; chunked over threads with ordered reduction
    struct Best {
        bool set = false;
        long index = -1;
        i128 fast_num = 0;
        Rat exact;
    };
    auto point_indices = [&](long index) {
        std::vector<int> idx(dp);
        for (int i = dp - 1; i >= 0; --i) {
            long size = static_cast<long>(comps[i].size());
            idx[i] = static_cast<int>(index % size);
            index /= size;
        }
        return idx;  // idx[0] is the most significant digit
    };

    std::vector<Rat> surface_values;
    if (spec.surface) surface_values.assign(total, Rat(0));

    int workers = std::max(1, jobs);
    std::vector<Best> bests(workers);
    parallel_for(workers, workers, [&](long t) {
        long lo = total * t / workers, hi = total * (t + 1) / workers;
        Best& best = bests[t];
        std::vector<i128> anum(support.size());
        std::vector<Rat> aq(support.size());
        for (long index = lo; index < hi; ++index) {
            auto idx = point_indices(index);
            if (fast) {
                std::fill(anum.begin(), anum.end(), 0);
                for (long p = 0; p < n_profiles; ++p) {
                    i128 wnum = 1;
                    for (int i = 0; i < dp; ++i) wnum *= comps[i][idx[i]][profile_choice[p][i]];
                    if (wnum == 0) continue;
                    for (size_t a = 0; a < support.size(); ++a)
                        if (pnum[p][a] != 0) anum[a] += wnum * pnum[p][a];
                }
                i128 num = fe.value_numerator(anum);
                if (!best.set || num > best.fast_num) {
                    best.set = true;
                    best.fast_num = num;
                    best.index = index;
                }
                if (spec.surface)
                    surface_values[index] = Rat(FixedEval::mpz_from_i128(num)) / fe.denominator();
            } else {
                std::fill(aq.begin(), aq.end(), Rat(0));
                for (long p = 0; p < n_profiles; ++p) {
                    Rat w(1);
                    for (int i = 0; i < dp; ++i) w *= rat(comps[i][idx[i]][profile_choice[p][i]], g);
                    if (w == 0) continue;
                    for (size_t a = 0; a < support.size(); ++a)
                        if (profile_probs[p][a] != 0) aq[a] += w * profile_probs[p][a];
                }
                Rat v = eval_objective(spec.objective, support, aq);
                if (!best.set || v > best.exact) {
                    best.set = true;
                    best.exact = v;
                    best.index = index;
                }
                if (spec.surface) surface_values[index] = v;
            }
        }
    });

    Best overall;
    for (const Best& b : bests) {
        if (!b.set) continue;
        bool take = !overall.set;
        if (!take) {
            if (fast)
                take = b.fast_num > overall.fast_num ||
                       (b.fast_num == overall.fast_num && b.index < overall.index);
            else
                take = b.exact > overall.exact || (b.exact == overall.exact && b.index < overall.index);
        }
        if (take) overall = b;
    }
    if (!overall.set) throw std::logic_error("empty grid");

    GridResult result;
    result.points = total;
    auto best_idx = point_indices(overall.index);
    std::vector<std::vector<Rat>> best_probs(dp);
    for (int i = 0; i < dp; ++i) {
        best_probs[i].resize(points[i].actions.size());
        for (size_t a = 0; a < points[i].actions.size(); ++a)
            best_probs[i][a] = rat(comps[i][best_idx[i]][a], g);
    }
    result.best = make_scheduler(best_probs);
    if (fast)
        result.best_value = Rat(FixedEval::mpz_from_i128(overall.fast_num)) / fe.denominator();
    else
        result.best_value = overall.exact;
    result.best_value.canonicalize();

    if (spec.surface) {
        for (long index = 0; index < total; ++index) {
            auto idx = point_indices(index);
            std::vector<Rat> flat;
            for (int i = 0; i < dp; ++i)
                for (size_t a = 0; a < points[i].actions.size(); ++a)
                    flat.push_back(rat(comps[i][idx[i]][a], g));
            Rat v = surface_values[index];
            v.canonicalize();
            result.surface.emplace_back(std::move(flat), v);
        }
    }
    return result;
}

namespace {

/// Stateless counter PRNG: draw k of stream i under seed s is
/// mix64(s + i*0xD1B54A32D192ED03 + (k+1)*0x9E3779B97F4A7C15).
struct CounterRng {
    std::uint64_t state;
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : state(seed + stream * 0xD1B54A32D192ED03ULL) {}
    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state;
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }
};

/// Cumulative u64 thresholds for exact-rational distributions; the final
/// bucket is a catch-all so rounding down never loses an outcome.
std::vector<std::uint64_t> thresholds(const std::vector<Rat>& probs) {
    std::vector<std::uint64_t> out;
    Rat cum(0);
    mpz_class two64 = mpz_class(1) << 64;
    for (size_t i = 0; i + 1 < probs.size(); ++i) {
        cum += probs[i];
        mpz_class scaled = (cum.get_num() * two64) / cum.get_den();
        out.push_back(scaled.fits_ulong_p() ? static_cast<std::uint64_t>(scaled.get_ui())
                                            : ~0ULL);
    }
    return out;  // size = probs.size() - 1
}

}  // namespace

SimReport simulate(const Mdp& m, const Scheduler& sched, long n, std::uint64_t seed, long step_cap,
                   int retry_limit, int jobs) {
    SimReport rep;
    rep.n = n;
    rep.seed = seed;
    if (n == 0) return rep;

    // per (state, action) successor samplers
    std::map<std::pair<int, int>, std::pair<std::vector<int>, std::vector<std::uint64_t>>> succ_cache;
    for (int s = 0; s < m.state_count(); ++s)
        for (const auto& c : m.choices[s]) {
            std::vector<int> targets;
            std::vector<Rat> probs;
            for (const auto& t : c.successors) {
                targets.push_back(t.target);
                probs.push_back(t.prob);
            }
            succ_cache[{s, c.action}] = {targets, thresholds(probs)};
        }

    // per (state, reward-level) action samplers, filled lazily
    struct ActionSampler {
        std::vector<int> actions;
        std::vector<std::uint64_t> cuts;
    };
    std::map<std::pair<int, long>, ActionSampler> action_cache;
    std::mutex cache_mutex;
    auto sampler_for = [&](int s, long w) -> ActionSampler {
        {
            std::lock_guard<std::mutex> lock(cache_mutex);
            auto it = action_cache.find({s, w});
            if (it != action_cache.end()) return it->second;
        }
        ActionSampler as;
        std::vector<Rat> probs;
        for (const auto& ap : sched.distribution_at(m, s, Rat(w))) {
            if (ap.prob == 0) continue;
            as.actions.push_back(ap.action);
            probs.push_back(ap.prob);
        }
        as.cuts = thresholds(probs);
        std::lock_guard<std::mutex> lock(cache_mutex);
        action_cache[{s, w}] = as;
        return as;
    };

    int workers = std::max(1, jobs);
    std::vector<std::map<long, long>> counts(workers);  // integer rewards
    std::vector<long> resampled(workers, 0);
    std::vector<std::string> errors(workers);

    parallel_for(workers, workers, [&](long t) {
        long lo = n * t / workers, hi = n * (t + 1) / workers;
        for (long i = lo; i < hi; ++i) {
            bool done = false;
            for (int attempt = 0; attempt <= retry_limit && !done; ++attempt) {
                if (attempt > 0) ++resampled[t];
                CounterRng rng(seed, static_cast<std::uint64_t>(i) +
                                         static_cast<std::uint64_t>(attempt) * static_cast<std::uint64_t>(n));
                int s = m.initial;
                long w = 0;
                long steps = 0;
                while (!m.is_trap(s)) {
                    if (++steps > step_cap) break;
                    ActionSampler as = sampler_for(s, w);
                    std::uint64_t u = rng.next();
                    size_t ai = as.cuts.size();
                    for (size_t j = 0; j < as.cuts.size(); ++j)
                        if (u < as.cuts[j]) {
                            ai = j;
                            break;
                        }
                    int action = as.actions[ai];
                    const ActionChoice* c = m.choice_for(s, action);
                    w += c->reward.get_num().get_si();
                    const auto& [targets, cuts] = succ_cache.at({s, action});
                    std::uint64_t v = rng.next();
                    size_t ti = cuts.size();
                    for (size_t j = 0; j < cuts.size(); ++j)
                        if (v < cuts[j]) {
                            ti = j;
                            break;
                        }
                    s = targets[ti];
                }
                if (m.is_trap(s)) {
                    ++counts[t][w];
                    done = true;
                }
            }
            if (!done) {
                errors[t] = "path " + std::to_string(i) + " exceeded the step cap in every retry";
                return;
            }
        }
    });

    for (const auto& e : errors)
        if (!e.empty()) throw BudgetExceeded(e);

    std::map<long, long> merged;
    for (int t = 0; t < workers; ++t) {
        rep.resampled += resampled[t];
        for (const auto& [w, c] : counts[t]) merged[w] += c;
    }
    for (const auto& [w, c] : merged) rep.histogram[Rat(w)] = c;

    double mean = 0;
    for (const auto& [w, c] : merged) mean += static_cast<double>(w) * c;
    mean /= static_cast<double>(n);
    double m2 = 0, madsum = 0, smadsum = 0, svsum = 0, mad2 = 0;
    for (const auto& [w, c] : merged) {
        double d = static_cast<double>(w) - mean;
        m2 += c * d * d;
        madsum += c * std::fabs(d);
        if (d < 0) {
            smadsum += c * (-d);
            svsum += c * d * d;
        }
    }
    rep.expectation = mean;
    rep.variance = m2 / n;
    rep.mad = madsum / n;
    rep.smad = smadsum / n;
    rep.semivariance = svsum / n;
    double svar = n > 1 ? m2 / (n - 1) : 0.0;
    rep.se_expectation = std::sqrt(svar / n);
    for (const auto& [w, c] : merged) {
        double d = std::fabs(static_cast<double>(w) - mean) - rep.mad;
        mad2 += c * d * d;
    }
    rep.se_mad = n > 1 ? std::sqrt(mad2 / (n - 1) / n) : 0.0;
    return rep;
}

}  // namespace riskmdp
