#include "sentry/search.hpp"

#include "sentry/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <thread>

namespace sentry {

namespace {

std::uint64_t splitmix64(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stream indices past any individual index.
constexpr std::uint64_t kSelectStream = UINT64_MAX;
constexpr std::uint64_t kOffsetStream = UINT64_MAX - 1;

double unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t below(Rng& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

BigInt clamp(const BigInt& v, const BigInt& lo, const BigInt& hi) {
    if (v < lo)
        return lo;
    if (v > hi)
        return hi;
    return v;
}

bool revert_only(const SsaFunction& fn, BlockId b) {
    const auto& in = fn.blocks[b].instrs;
    return in.size() == 1 && in[0].op == Op::Revert;
}

bool is_pure(const SsaFunction& fn, const IrExpr& e) {
    bool ok = true;
    visit(e, [&](const IrExpr& x) {
        switch (x.kind) {
        case IrExpr::Kind::Const:
        case IrExpr::Kind::Binary:
        case IrExpr::Kind::Unary:
        case IrExpr::Kind::Cast:
            break;
        case IrExpr::Kind::Var:
            ok &= x.ssa < fn.values.size() && fn.values[x.ssa].kind == ValueDef::Kind::Param;
            break;
        default:
            ok = false;
        }
    });
    return ok;
}

// Mirrors the executor on the pure subset; nullopt on division by zero.
std::optional<BigInt> eval_pure(const SsaFunction& fn, const IrExpr& e, const std::vector<BigInt>& params) {
    switch (e.kind) {
    case IrExpr::Kind::Const:
        return reduce(e.value, e.ty);
    case IrExpr::Kind::Var:
        return params.at(fn.values[e.ssa].local);
    case IrExpr::Kind::Unary: {
        auto x = eval_pure(fn, e.args[0], params);
        if (!x)
            return x;
        if (e.unary == UnaryOp::Not)
            return BigInt(*x == 0 ? 1 : 0);
        return reduce(-*x, e.ty);
    }
    case IrExpr::Kind::Cast: {
        auto x = eval_pure(fn, e.args[0], params);
        if (!x)
            return x;
        if (e.ty.kind == TypeName::Kind::Bool)
            return BigInt(*x != 0 ? 1 : 0);
        return reduce(*x, e.ty);
    }
    case IrExpr::Kind::Binary: {
        auto a = eval_pure(fn, e.args[0], params);
        auto b = eval_pure(fn, e.args[1], params);
        if (!a || !b)
            return std::nullopt;
        switch (e.binary) {
        case BinaryOp::And: return BigInt(*a != 0 && *b != 0 ? 1 : 0);
        case BinaryOp::Or: return BigInt(*a != 0 || *b != 0 ? 1 : 0);
        case BinaryOp::Lt: return BigInt(*a < *b ? 1 : 0);
        case BinaryOp::Le: return BigInt(*a <= *b ? 1 : 0);
        case BinaryOp::Gt: return BigInt(*a > *b ? 1 : 0);
        case BinaryOp::Ge: return BigInt(*a >= *b ? 1 : 0);
        case BinaryOp::Eq: return BigInt(*a == *b ? 1 : 0);
        case BinaryOp::Ne: return BigInt(*a != *b ? 1 : 0);
        case BinaryOp::Add: return reduce(*a + *b, e.ty);
        case BinaryOp::Sub: return reduce(*a - *b, e.ty);
        case BinaryOp::Mul: return reduce(*a * *b, e.ty);
        case BinaryOp::Div:
        case BinaryOp::Mod:
            if (*b == 0)
                return std::nullopt;
            return reduce(e.binary == BinaryOp::Div ? BigInt(*a / *b) : BigInt(*a % *b), e.ty);
        }
        return std::nullopt;
    }
    default:
        return std::nullopt;
    }
}

bool mentions_local(const IrExpr& e, const SsaFunction& fn, std::uint32_t local) {
    bool hit = false;
    visit(e, [&](const IrExpr& x) {
        if (x.kind == IrExpr::Kind::Var && fn.values[x.ssa].local == local)
            hit = true;
    });
    return hit;
}

void walk_constructor(const Program& prog, ConstraintSet& cs, std::size_t k) {
    const SsaFunction& fn = prog.functions[cs.frames[k].fn];
    std::set<BlockId> seen;
    BlockId b = fn.entry;
    while (seen.insert(b).second) {
        const Block& blk = fn.blocks[b];
        for (std::size_t i = 0; i + 1 < blk.instrs.size(); ++i) {
            const Instr& in = blk.instrs[i];
            if (in.op != Op::Assign || in.args.size() != 1 || in.args[0].kind != IrExpr::Kind::Call)
                continue;
            std::size_t callee = prog.index_of(in.args[0].callee);
            if (callee >= prog.functions.size() || !prog.functions[callee].is_constructor)
                continue;
            bool pure = true;
            for (const auto& a : in.args[0].args)
                pure &= is_pure(fn, a);
            if (!pure)
                continue;
            cs.frames.push_back({callee, k, in.args[0].args});
            walk_constructor(prog, cs, cs.frames.size() - 1);
        }
        const Instr& t = blk.terminator();
        if (t.op == Op::Jump) {
            b = blk.succs[0];
            continue;
        }
        if (t.op != Op::JumpI)
            break;
        bool r0 = revert_only(fn, blk.succs[0]), r1 = revert_only(fn, blk.succs[1]);
        if (r0 == r1 || !is_pure(fn, t.args[0]))
            break;
        Predicate p;
        p.kind = k == 0 ? Predicate::Kind::Dependency : Predicate::Kind::Inheritance;
        p.frame = k;
        p.cond = t.args[0];
        p.want = r1;
        cs.predicates.push_back(std::move(p));
        b = r0 ? blk.succs[1] : blk.succs[0];
    }
}

// Parameter values per frame; nullopt where an argument cannot be evaluated.
std::vector<std::optional<std::vector<BigInt>>> frame_params(const Program& prog, const ConstraintSet& cs,
                                                             const InputVector& genes) {
    std::vector<std::optional<std::vector<BigInt>>> out(cs.frames.size());
    for (std::size_t k = 0; k < cs.frames.size(); ++k) {
        const CtorFrame& fr = cs.frames[k];
        const SsaFunction& fn = prog.functions[fr.fn];
        std::vector<BigInt> params(fn.param_count, 0);
        if (k == 0) {
            for (std::size_t i = 0; i < fn.param_count; ++i)
                if (cs.param_gene[i] != SIZE_MAX)
                    params[i] = genes[cs.param_gene[i]];
        } else {
            if (!out[fr.parent])
                continue;
            const SsaFunction& caller = prog.functions[cs.frames[fr.parent].fn];
            bool ok = true;
            for (std::size_t i = 0; i < fr.args.size() && i < params.size(); ++i) {
                auto v = eval_pure(caller, fr.args[i], *out[fr.parent]);
                if (!v) {
                    ok = false;
                    break;
                }
                params[i] = reduce(*v, fn.locals[i].ty);
            }
            if (!ok)
                continue;
        }
        out[k] = std::move(params);
    }
    return out;
}

bool holds(const Program& prog, const ConstraintSet& cs, const Predicate& p,
           const std::vector<std::optional<std::vector<BigInt>>>& params) {
    if (!params[p.frame])
        return false;
    auto v = eval_pure(prog.functions[cs.frames[p.frame].fn], p.cond, *params[p.frame]);
    return v && ((*v != 0) == p.want);
}

// `x == e` on a gene parameter x: the value x must take, if any.
bool repair(const Program& prog, const ConstraintSet& cs, const Predicate& p, InputVector& genes,
            const std::vector<BigInt>& params) {
    const IrExpr& c = p.cond;
    if (c.kind != IrExpr::Kind::Binary)
        return false;
    if (!((c.binary == BinaryOp::Eq && p.want) || (c.binary == BinaryOp::Ne && !p.want)))
        return false;
    const SsaFunction& fn = prog.functions[cs.frames[0].fn];
    for (int side = 0; side < 2; ++side) {
        const IrExpr& x = c.args[side];
        const IrExpr& other = c.args[1 - side];
        if (x.kind != IrExpr::Kind::Var)
            continue;
        std::uint32_t local = fn.values[x.ssa].local;
        if (local >= cs.param_gene.size() || cs.param_gene[local] == SIZE_MAX || mentions_local(other, fn, local))
            continue;
        auto v = eval_pure(fn, other, params);
        std::size_t g = cs.param_gene[local];
        if (!v || *v < cs.lo[g] || *v > cs.hi[g] || genes[g] == *v)
            continue;
        genes[g] = *v;
        return true;
    }
    return false;
}

template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < std::min<std::size_t>(threads, n); ++t)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next++) < n;) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!err)
                        err = std::current_exception();
                }
            }
        });
    for (auto& th : pool)
        th.join();
    if (err)
        std::rethrow_exception(err);
}

GenerationStats stats_of(std::size_t gen, const std::vector<Individual>& pop) {
    GenerationStats s;
    s.generation = gen;
    s.best_f1 = s.best_f2 = -1;
    double sum1 = 0, sum2 = 0;
    for (const auto& ind : pop) {
        s.best_f1 = std::max(s.best_f1, ind.fitness.f1);
        s.best_f2 = std::max(s.best_f2, ind.fitness.f2);
        sum1 += ind.fitness.f1;
        sum2 += ind.fitness.f2;
    }
    s.mean_f1 = sum1 / static_cast<double>(pop.size());
    s.mean_f2 = sum2 / static_cast<double>(pop.size());
    return s;
}

// Evaluates genes in parallel, then folds each trace into the result in index order.
std::vector<Fitness> evaluate_batch(const SearchProblem& p, const std::vector<const InputVector*>& batch,
                                    unsigned threads, SearchResult& res) {
    std::vector<Evaluation> evals(batch.size());
    parallel_for(batch.size(), threads, [&](std::size_t i) { evals[i] = evaluate(p, *batch[i]); });
    std::vector<Fitness> out;
    for (auto& e : evals) {
        witness_all(res.findings, e.exec.trace, res.evaluations++);
        res.union_counters.merge(e.exec.counters, *p.prog);
        out.push_back(e.fitness);
    }
    return out;
}

} // namespace

void SearchConfig::validate() const {
    if (N == 0)
        throw std::invalid_argument("population size must be positive");
    if (K == 0 || K > N)
        throw std::invalid_argument("mating pool size must be in 1..N");
    if (!(Pc >= 0 && Pc <= 1))
        throw std::invalid_argument("crossover rate must be in [0, 1]");
    if (!(Pm >= 0 && Pm <= 1))
        throw std::invalid_argument("mutation rate must be in [0, 1]");
}

bool dominates(const Fitness& a, const Fitness& b) {
    return a.f1 >= b.f1 && a.f2 >= b.f2 && (a.f1 > b.f1 || a.f2 > b.f2);
}

Rng substream(std::uint64_t seed, std::uint64_t generation, std::uint64_t index) {
    std::uint64_t s = seed;
    s = splitmix64(s) ^ generation;
    s = splitmix64(s) ^ index;
    return Rng(splitmix64(s));
}

BigInt uniform_big(Rng& rng, const BigInt& lo, const BigInt& hi) {
    BigInt range = hi - lo;
    if (range <= 0)
        return lo;
    unsigned bits = static_cast<unsigned>(boost::multiprecision::msb(range)) + 1;
    BigInt mask = pow2(bits) - 1;
    for (;;) {
        BigInt r = 0;
        for (unsigned w = 0; w < (bits + 63) / 64; ++w)
            r = (r << 64) | BigInt(rng());
        r &= mask;
        if (r <= range)
            return lo + r;
    }
}

ConstraintSet derive_constraints(const Program& prog, const InputLayout& layout) {
    ConstraintSet cs;
    for (const auto& s : layout.slots) {
        cs.lo.push_back(s.lo);
        cs.hi.push_back(s.hi);
    }
    std::size_t ctor = SIZE_MAX;
    for (std::size_t e : prog.entries)
        if (prog.functions[e].is_constructor)
            ctor = e;
    if (ctor == SIZE_MAX)
        return cs;
    cs.param_gene.assign(prog.functions[ctor].param_count, SIZE_MAX);
    for (const auto& s : layout.slots)
        if (s.origin == InputSlot::Origin::Param && s.function == ctor)
            cs.param_gene[s.param] = s.index;
    cs.frames.push_back({ctor, SIZE_MAX, {}});
    walk_constructor(prog, cs, 0);
    return cs;
}

bool enforce_constraints(InputVector& genes, const Program& prog, const ConstraintSet& cs) {
    for (std::size_t g = 0; g < genes.size(); ++g)
        genes[g] = clamp(genes[g], cs.lo[g], cs.hi[g]);
    if (cs.predicates.empty())
        return true;
    for (std::size_t round = 0; round <= cs.predicates.size(); ++round) {
        bool changed = false;
        for (const auto& p : cs.predicates) {
            if (p.kind != Predicate::Kind::Dependency)
                continue;
            auto params = frame_params(prog, cs, genes);
            if (!holds(prog, cs, p, params) && params[0])
                changed |= repair(prog, cs, p, genes, *params[0]);
        }
        if (!changed)
            break;
    }
    auto params = frame_params(prog, cs, genes);
    for (const auto& p : cs.predicates)
        if (!holds(prog, cs, p, params))
            return false;
    return true;
}

SearchProblem make_problem(const Program& prog, std::vector<Label> labels, const Limits& limits) {
    SearchProblem p;
    p.prog = &prog;
    p.layout = collect_input_slots(prog);
    p.art = analyze(prog);
    p.specials = collect_special_values(prog, p.art.dep, p.layout);
    p.constraints = derive_constraints(prog, p.layout);
    p.inst = instrument(prog);
    p.census = prog.census();
    p.static_findings = run_all(p.art);
    p.labels = std::move(labels);
    p.limits = limits;
    return p;
}

double accuracy_objective(const std::vector<Finding>& findings, const std::vector<Label>& labels,
                          std::uint64_t statements) {
    if (labels.empty()) {
        if (findings.empty())
            return 1.0;
        if (statements == 0)
            return 0.0;
        return 1.0 - std::min(1.0, static_cast<double>(findings.size()) / static_cast<double>(statements));
    }
    double sum = 0;
    for (const auto& l : labels) {
        double best = 0;
        for (const auto& f : findings)
            if (label_matches(l, f))
                best = std::max(best, f.score);
        sum += best;
    }
    return sum / static_cast<double>(labels.size());
}

Evaluation evaluate(const SearchProblem& p, const InputVector& genes) {
    Evaluation e;
    e.exec = execute(*p.prog, &p.inst, p.layout, genes, p.limits);
    e.fitness.f2 = coverage(e.exec.counters, p.census);
    std::vector<Finding> fs = p.static_findings;
    witness_all(fs, e.exec.trace, 0);
    e.fitness.f1 = accuracy_objective(fs, p.labels, p.census.total());
    return e;
}

std::vector<Individual> init_population(const SearchProblem& p, const SearchConfig& cfg) {
    const std::size_t M = p.layout.size();
    const std::size_t seeded = std::min(cfg.N, std::max<std::size_t>(1, cfg.N / 4));
    // Per gene, back-to-back shuffles of its special values: every value shows
    // up once the seeded count reaches the set size, and genes pair up at random.
    Rng order_rng = substream(cfg.seed, 0, kOffsetStream);
    std::vector<std::vector<std::size_t>> pick(M);
    for (std::size_t g = 0; g < M; ++g) {
        const std::size_t n = p.specials[g].size();
        std::vector<std::size_t> perm(n);
        while (n > 0 && pick[g].size() < seeded) {
            std::iota(perm.begin(), perm.end(), 0);
            for (std::size_t k = n; k > 1; --k)
                std::swap(perm[k - 1], perm[below(order_rng, k)]);
            pick[g].insert(pick[g].end(), perm.begin(), perm.end());
        }
    }

    std::vector<Individual> pop;
    std::size_t attempts = 0;
    for (std::size_t i = 0; i < cfg.N; ++i) {
        Rng rng = substream(cfg.seed, 0, i);
        for (std::size_t tries = 0;; ++tries) {
            if (++attempts > cfg.N * 100)
                throw InfeasibleConstraints("no individual satisfies the constructor constraints after " +
                                            std::to_string(cfg.N * 100) + " attempts");
            InputVector genes(M);
            for (std::size_t g = 0; g < M; ++g) {
                const auto& sv = p.specials[g];
                if (i < seeded && !sv.empty()) {
                    genes[g] = sv[tries == 0 ? pick[g][i] : below(rng, sv.size())];
                } else {
                    genes[g] = uniform_big(rng, p.constraints.lo[g], p.constraints.hi[g]);
                }
            }
            if (enforce_constraints(genes, *p.prog, p.constraints)) {
                pop.push_back({std::move(genes), {}, 0, 0});
                break;
            }
        }
    }
    return pop;
}

std::vector<std::vector<std::size_t>> fast_nondominated_sort(const std::vector<Fitness>& fs) {
    const std::size_t n = fs.size();
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<std::size_t> count(n, 0);
    std::vector<std::vector<std::size_t>> fronts(1);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            if (dominates(fs[a], fs[b]))
                dominated[a].push_back(b);
            else if (dominates(fs[b], fs[a]))
                ++count[a];
        }
        if (count[a] == 0)
            fronts[0].push_back(a);
    }
    if (fronts[0].empty())
        return {};
    for (std::size_t i = 0; !fronts[i].empty(); ++i) {
        std::vector<std::size_t> next;
        for (std::size_t a : fronts[i])
            for (std::size_t b : dominated[a])
                if (--count[b] == 0)
                    next.push_back(b);
        std::sort(next.begin(), next.end());
        fronts.push_back(std::move(next));
    }
    fronts.pop_back();
    return fronts;
}

std::vector<double> crowding_distance(const std::vector<std::size_t>& front, const std::vector<Fitness>& fs) {
    const std::size_t n = front.size();
    std::vector<double> d(n, 0.0);
    if (n <= 2)
        return std::vector<double>(n, kInfinity);
    for (int obj = 0; obj < 2; ++obj) {
        auto val = [&](std::size_t k) { return obj == 0 ? fs[front[k]].f1 : fs[front[k]].f2; };
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val(a) < val(b); });
        d[order.front()] = kInfinity;
        d[order.back()] = kInfinity;
        double range = val(order.back()) - val(order.front());
        if (range <= 0)
            continue;
        for (std::size_t k = 1; k + 1 < n; ++k)
            d[order[k]] += (val(order[k + 1]) - val(order[k - 1])) / range;
    }
    return d;
}

void assign_rank_and_crowding(std::vector<Individual>& pop) {
    std::vector<Fitness> fs;
    for (const auto& ind : pop)
        fs.push_back(ind.fitness);
    auto fronts = fast_nondominated_sort(fs);
    for (std::size_t r = 0; r < fronts.size(); ++r) {
        auto d = crowding_distance(fronts[r], fs);
        for (std::size_t k = 0; k < fronts[r].size(); ++k) {
            pop[fronts[r][k]].rank = r + 1;
            pop[fronts[r][k]].crowding = d[k];
        }
    }
}

std::vector<std::size_t> select_parents(const std::vector<Individual>& pop, std::size_t K, Rng& rng) {
    const std::size_t n = pop.size();
    std::vector<std::size_t> pool;
    for (std::size_t k = 0; k < K; ++k) {
        std::size_t a = below(rng, n);
        std::size_t b = n > 1 ? (a + 1 + below(rng, n - 1)) % n : a;
        const Individual& x = pop[a];
        const Individual& y = pop[b];
        std::size_t win;
        if (x.rank != y.rank)
            win = x.rank < y.rank ? a : b;
        else if (x.crowding != y.crowding)
            win = x.crowding > y.crowding ? a : b;
        else
            win = (rng() & 1) ? a : b;
        pool.push_back(win);
    }
    return pool;
}

std::pair<InputVector, InputVector> crossover(const InputVector& a, const InputVector& b, double Pc, Rng& rng) {
    if (a.size() != b.size())
        throw std::invalid_argument("crossover of vectors with different lengths");
    InputVector c1 = a, c2 = b;
    if (unit(rng) >= Pc)
        return {c1, c2};
    for (std::size_t i = 0; i < a.size(); ++i)
        if (rng() & 1)
            std::swap(c1[i], c2[i]);
    return {c1, c2};
}

void mutate_uniform_integer(InputVector& genes, const ConstraintSet& cs, Rng& rng) {
    const std::size_t M = genes.size();
    for (std::size_t g = 0; g < M; ++g) {
        if (below(rng, M) != 0)
            continue;
        BigInt d = (cs.hi[g] - cs.lo[g]) / 16;
        if (d < 1)
            d = 1;
        genes[g] = clamp(genes[g] + uniform_big(rng, -d, d), cs.lo[g], cs.hi[g]);
    }
}

void mutate_random_order(InputVector& genes, const ConstraintSet& cs, std::size_t p, std::size_t q, Rng& rng) {
    for (std::size_t k = q; k > p; --k)
        std::swap(genes[k], genes[p + below(rng, k - p + 1)]);
    for (std::size_t g = p; g <= q; ++g)
        genes[g] = clamp(genes[g], cs.lo[g], cs.hi[g]);
}

void mutate(InputVector& genes, double Pm, const ConstraintSet& cs, Rng& rng) {
    if (genes.empty() || unit(rng) >= Pm)
        return;
    const std::size_t M = genes.size();
    if ((rng() & 1) || M < 2) {
        mutate_uniform_integer(genes, cs, rng);
        return;
    }
    std::size_t p = below(rng, M);
    std::size_t q = (p + 1 + below(rng, M - 1)) % M;
    if (p > q)
        std::swap(p, q);
    mutate_random_order(genes, cs, p, q, rng);
}

std::vector<Individual> environmental_selection(std::vector<Individual> combined, std::size_t N) {
    std::vector<Fitness> fs;
    for (const auto& ind : combined)
        fs.push_back(ind.fitness);
    std::vector<Individual> out;
    for (const auto& front : fast_nondominated_sort(fs)) {
        if (out.size() + front.size() <= N) {
            for (std::size_t i : front)
                out.push_back(std::move(combined[i]));
            continue;
        }
        auto d = crowding_distance(front, fs);
        std::vector<std::size_t> order(front.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const Fitness& x = fs[front[a]];
            const Fitness& y = fs[front[b]];
            if (d[a] != d[b])
                return d[a] > d[b];
            if (x.f2 != y.f2)
                return x.f2 > y.f2;
            if (x.f1 != y.f1)
                return x.f1 > y.f1;
            return a < b;
        });
        for (std::size_t k = 0; out.size() < N; ++k)
            out.push_back(std::move(combined[front[order[k]]]));
        break;
    }
    return out;
}

SearchResult run(const SearchProblem& p, const SearchConfig& cfg) {
    cfg.validate();
    SearchResult res;
    res.findings = p.static_findings;

    res.population = init_population(p, cfg);
    {
        std::vector<const InputVector*> batch;
        for (const auto& ind : res.population)
            batch.push_back(&ind.genes);
        auto fit = evaluate_batch(p, batch, cfg.threads, res);
        for (std::size_t i = 0; i < fit.size(); ++i)
            res.population[i].fitness = fit[i];
    }
    assign_rank_and_crowding(res.population);
    res.history.push_back(stats_of(0, res.population));

    std::size_t stagnant = 0;
    for (std::size_t gen = 1; gen <= cfg.T; ++gen) {
        Rng sel = substream(cfg.seed, gen, kSelectStream);
        auto pool = select_parents(res.population, cfg.K, sel);

        std::vector<Individual> offspring;
        for (std::size_t j = 0; offspring.size() < cfg.N; ++j) {
            if (j >= cfg.N * 100)
                throw InfeasibleConstraints("no offspring satisfies the constructor constraints after " +
                                            std::to_string(cfg.N * 100) + " attempts");
            Rng rng = substream(cfg.seed, gen, j);
            const auto& a = res.population[pool[below(rng, pool.size())]].genes;
            const auto& b = res.population[pool[below(rng, pool.size())]].genes;
            auto [c1, c2] = crossover(a, b, cfg.Pc, rng);
            for (InputVector* c : {&c1, &c2}) {
                mutate(*c, cfg.Pm, p.constraints, rng);
                if (offspring.size() < cfg.N && enforce_constraints(*c, *p.prog, p.constraints))
                    offspring.push_back({std::move(*c), {}, 0, 0});
            }
        }
        std::vector<const InputVector*> batch;
        for (const auto& ind : offspring)
            batch.push_back(&ind.genes);
        auto fit = evaluate_batch(p, batch, cfg.threads, res);
        for (std::size_t i = 0; i < fit.size(); ++i)
            offspring[i].fitness = fit[i];

        std::vector<Individual> combined = std::move(res.population);
        for (auto& o : offspring)
            combined.push_back(std::move(o));
        res.population = environmental_selection(std::move(combined), cfg.N);
        assign_rank_and_crowding(res.population);
        res.history.push_back(stats_of(gen, res.population));
        res.generations = gen;

        const auto& prev = res.history[res.history.size() - 2];
        const auto& now = res.history.back();
        stagnant = (now.best_f1 == prev.best_f1 && now.best_f2 == prev.best_f2) ? stagnant + 1 : 0;
        if (cfg.stagnation_window > 0 && stagnant >= cfg.stagnation_window) {
            res.stagnated = true;
            break;
        }
    }

    for (std::size_t i = 0; i < res.population.size(); ++i)
        if (res.population[i].rank == 1)
            res.front.push_back(i);
    normalize(res.findings);
    return res;
}

} // namespace sentry
