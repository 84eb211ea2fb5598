#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sentry/frontend.hpp"
#include "sentry/search.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

using namespace sentry;

namespace {

struct Built {
    SourceUnit unit;
    Program prog;
    SearchProblem problem;
};

std::unique_ptr<Built> build(const std::string& src, std::vector<Label> labels = {}) {
    auto b = std::make_unique<Built>();
    b->unit = parse(src, "t.minisol");
    b->prog = build_program(b->unit);
    b->problem = make_problem(b->prog, std::move(labels));
    return b;
}

std::size_t gene(const SearchProblem& p, const std::string& name) {
    for (const auto& s : p.layout.slots)
        if (s.name == name)
            return s.index;
    throw std::runtime_error("no gene " + name);
}

std::vector<Fitness> random_fitness(Rng& rng, std::size_t n) {
    std::vector<Fitness> fs(n);
    for (auto& f : fs) {
        // a coarse grid so ties and duplicates are common
        f.f1 = static_cast<double>(rng() % 8) / 7;
        f.f2 = static_cast<double>(rng() % 8) / 7;
    }
    return fs;
}

// Repeatedly peel off the members no remaining member beats.
std::vector<std::vector<std::size_t>> brute_fronts(const std::vector<Fitness>& fs) {
    auto beats = [](const Fitness& a, const Fitness& b) {
        bool no_worse = !(a.f1 < b.f1) && !(a.f2 < b.f2);
        bool better = a.f1 > b.f1 || a.f2 > b.f2;
        return no_worse && better;
    };
    std::set<std::size_t> left;
    for (std::size_t i = 0; i < fs.size(); ++i)
        left.insert(i);
    std::vector<std::vector<std::size_t>> out;
    while (!left.empty()) {
        std::vector<std::size_t> front;
        for (std::size_t i : left) {
            bool beaten = false;
            for (std::size_t j : left)
                beaten |= beats(fs[j], fs[i]);
            if (!beaten)
                front.push_back(i);
        }
        for (std::size_t i : front)
            left.erase(i);
        out.push_back(front);
    }
    return out;
}

std::string fingerprint(const SearchResult& r) {
    std::ostringstream os;
    os.precision(17);
    for (const auto& ind : r.population) {
        for (const auto& g : ind.genes)
            os << g << ",";
        os << ind.fitness.f1 << "/" << ind.fitness.f2 << "/" << ind.rank << "/" << ind.crowding << "\n";
    }
    for (const auto& h : r.history)
        os << h.best_f1 << " " << h.mean_f1 << " " << h.best_f2 << " " << h.mean_f2 << "\n";
    for (const auto& f : r.findings)
        os << f.evidence << "|" << f.score << "\n";
    os << r.generations << " " << r.evaluations;
    return os.str();
}

} // namespace

TEST_CASE("fast non-dominated sort equals the brute-force partition") {
    Rng rng(17);
    auto t0 = std::chrono::steady_clock::now();
    for (int k = 0; k < 100; ++k) {
        auto fs = random_fitness(rng, 1 + rng() % 50);
        CHECK(fast_nondominated_sort(fs) == brute_fronts(fs));
    }
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(5));
}

TEST_CASE("non-dominated sort examples") {
    std::vector<Fitness> three = {{0.5, 0.5}, {0.9, 0.9}, {0.9, 0.5}};
    CHECK(fast_nondominated_sort(three) == std::vector<std::vector<std::size_t>>{{1}, {2}, {0}});
    std::vector<Fitness> same(6, Fitness{0.3, 0.3});
    CHECK(fast_nondominated_sort(same) == std::vector<std::vector<std::size_t>>{{0, 1, 2, 3, 4, 5}});
    std::vector<Fitness> cross = {{1, 0}, {0, 1}};
    CHECK(fast_nondominated_sort(cross) == std::vector<std::vector<std::size_t>>{{0, 1}});
    CHECK(fast_nondominated_sort({}).empty());
}

TEST_CASE("crowding distance matches the direct formula") {
    Rng rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (int k = 0; k < 100; ++k) {
        std::size_t n = 3 + rng() % 30;
        std::vector<Fitness> fs(n);
        for (auto& f : fs)
            f = {u(rng), u(rng)};
        std::vector<std::size_t> front(n);
        for (std::size_t i = 0; i < n; ++i)
            front[i] = i;
        auto d = crowding_distance(front, fs);
        for (std::size_t i = 0; i < n; ++i) {
            double want = 0;
            for (int obj = 0; obj < 2; ++obj) {
                auto v = [&](std::size_t j) { return obj == 0 ? fs[j].f1 : fs[j].f2; };
                double lo = v(0), hi = v(0), below = -1, above = 2;
                for (std::size_t j = 0; j < n; ++j) {
                    lo = std::min(lo, v(j));
                    hi = std::max(hi, v(j));
                    if (v(j) < v(i))
                        below = std::max(below, v(j));
                    if (v(j) > v(i))
                        above = std::min(above, v(j));
                }
                if (v(i) == lo || v(i) == hi)
                    want = kInfinity;
                else
                    want += (above - below) / (hi - lo);
            }
            CAPTURE(i);
            if (std::isinf(want))
                CHECK(std::isinf(d[i]));
            else
                CHECK(std::abs(d[i] - want) <= 1e-12);
        }
    }
}

TEST_CASE("crowding distance examples") {
    std::vector<Fitness> two = {{0.1, 0.2}, {0.3, 0.4}};
    for (double x : crowding_distance({0, 1}, two))
        CHECK(std::isinf(x));
    std::vector<Fitness> three = {{0, 1}, {0.5, 0.5}, {1, 0}};
    auto d = crowding_distance({0, 1, 2}, three);
    CHECK(std::isinf(d[0]));
    CHECK(d[1] == 2.0);
    CHECK(std::isinf(d[2]));
    std::vector<Fitness> flat(5, Fitness{0.4, 0.4});
    auto e = crowding_distance({0, 1, 2, 3, 4}, flat);
    CHECK(std::count_if(e.begin(), e.end(), [](double x) { return std::isinf(x); }) == 2);
    CHECK(std::count(e.begin(), e.end(), 0.0) == 3);
}

TEST_CASE("binary tournament prefers rank, then crowding") {
    std::vector<Individual> pop(2);
    pop[0].rank = 2;
    pop[1].rank = 1;
    Rng rng(1);
    for (std::size_t i : select_parents(pop, 20, rng))
        CHECK(i == 1);
    pop[0].rank = 1;
    pop[0].crowding = kInfinity;
    pop[1].crowding = 2;
    for (std::size_t i : select_parents(pop, 20, rng))
        CHECK(i == 0);
    std::vector<Individual> many(10);
    for (std::size_t i = 0; i < many.size(); ++i)
        many[i].rank = 1 + i % 3;
    Rng a(9), b(9);
    CHECK(select_parents(many, 20, a) == select_parents(many, 20, b));
}

TEST_CASE("uniform crossover") {
    InputVector a = {1, 2, 3, 4}, b = {9, 8, 7, 6};
    Rng rng(4);
    auto same = crossover(a, a, 1.0, rng);
    CHECK(same.first == a);
    CHECK(same.second == a);
    auto none = crossover(a, b, 0.0, rng);
    CHECK(none.first == a);
    CHECK(none.second == b);
    bool mixed = false;
    for (int k = 0; k < 20; ++k) {
        auto [c1, c2] = crossover(a, b, 1.0, rng);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(((c1[i] == a[i] && c2[i] == b[i]) || (c1[i] == b[i] && c2[i] == a[i])));
        }
        mixed |= c1 != a && c1 != b;
    }
    CHECK(mixed);
}

TEST_CASE("mutation operators") {
    ConstraintSet cs;
    cs.lo = {0};
    cs.hi = {255};
    Rng rng(6);
    InputVector g = {250};
    mutate(g, 0.0, cs, rng);
    CHECK(g == InputVector{250});

    // range 255 / 16 -> deltas in [-15, 15], truncated at 255
    std::set<BigInt> seen;
    for (int k = 0; k < 2000; ++k) {
        InputVector x = {250};
        mutate_uniform_integer(x, cs, rng);
        CHECK(x[0] >= 235);
        CHECK(x[0] <= 255);
        seen.insert(x[0]);
    }
    CHECK(seen.count(255) == 1);
    CHECK(seen.size() == 21);

    ConstraintSet five;
    five.lo.assign(5, 0);
    five.hi.assign(5, 1000);
    InputVector base = {10, 20, 30, 40, 50};
    bool moved = false;
    for (int k = 0; k < 20; ++k) {
        InputVector x = base;
        mutate_random_order(x, five, 1, 3, rng);
        CHECK(x[0] == 10);
        CHECK(x[4] == 50);
        std::multiset<BigInt> seg(x.begin() + 1, x.begin() + 4);
        CHECK(seg == std::multiset<BigInt>{20, 30, 40});
        moved |= x != base;
    }
    CHECK(moved);

    five.hi[2] = 1;
    InputVector y = {10, 20, 30, 40, 50};
    mutate_random_order(y, five, 1, 3, rng);
    CHECK(y[2] <= 1);
}

TEST_CASE("constraint enforcement: bounds, dependencies, inheritance") {
    auto vault = build(read_corpus("inheritance_vault.minisol"));
    const auto& p = vault->problem;
    std::size_t r = gene(p, "InheritanceVault.<init>.r");
    REQUIRE(p.constraints.predicates.size() == 1);
    CHECK(p.constraints.predicates[0].kind == Predicate::Kind::Inheritance);
    InputVector ok(p.layout.size(), 0);
    ok[r] = 5;
    InputVector copy = ok;
    CHECK(enforce_constraints(copy, vault->prog, p.constraints));
    CHECK(copy == ok);
    InputVector bad = ok;
    bad[r] = 0;
    CHECK_FALSE(enforce_constraints(bad, vault->prog, p.constraints));

    InputVector high = ok;
    high[r] = pow2(300);
    CHECK(enforce_constraints(high, vault->prog, p.constraints));
    CHECK(high[r] == pow2(256) - 1);

    auto eq = build("contract A { uint256 k; constructor(uint256 x) public { require(x == 42); k = x; } }");
    InputVector e(eq->problem.layout.size(), 0);
    CHECK(enforce_constraints(e, eq->prog, eq->problem.constraints));
    CHECK(e[gene(eq->problem, "A.<init>.x")] == 42);

    auto gt = build("contract A { uint256 k; constructor(uint256 x) public { require(x > 10); k = x; } }");
    InputVector lo(gt->problem.layout.size(), 0);
    lo[gene(gt->problem, "A.<init>.x")] = 3;
    CHECK_FALSE(enforce_constraints(lo, gt->prog, gt->problem.constraints));

    auto chain = build("contract B { uint256 v; constructor(uint256 y) public { require(y != 5); v = y; } }"
                       " contract C is B { constructor(uint256 x) public B(x + 1) { } }");
    std::size_t x = gene(chain->problem, "C.<init>.x");
    InputVector four(chain->problem.layout.size(), 0), three = four;
    four[x] = 4;
    three[x] = 3;
    CHECK_FALSE(enforce_constraints(four, chain->prog, chain->problem.constraints));
    CHECK(enforce_constraints(three, chain->prog, chain->problem.constraints));
}

TEST_CASE("initial population") {
    auto flag = build("contract A { uint256 c; function f(bool b) public { if (b) { c = 1; } } }");
    SearchConfig cfg;
    auto pop = init_population(flag->problem, cfg);
    CHECK(pop.size() == cfg.N);
    std::size_t b = gene(flag->problem, "A.f.b");
    for (const auto& ind : pop)
        CHECK((ind.genes[b] == 0 || ind.genes[b] == 1));

    auto guarded = build(read_corpus("guarded_branch.minisol"));
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        cfg.seed = seed;
        auto a = init_population(guarded->problem, cfg);
        auto again = init_population(guarded->problem, cfg);
        std::size_t key = gene(guarded->problem, "GuardedBranch.unlock.key");
        bool has = false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            has |= a[i].genes[key] == 3735928559u;
            CHECK(a[i].genes == again[i].genes);
        }
        CHECK(has);
    }

    auto vault = build(read_corpus("inheritance_vault.minisol"));
    std::size_t r = gene(vault->problem, "InheritanceVault.<init>.r");
    for (const auto& ind : init_population(vault->problem, cfg))
        CHECK(ind.genes[r] != 0);

    auto never = build("contract A { uint256 k; constructor(uint256 x) public { require(x > 5); require(x < 3); k = x; } }");
    CHECK_THROWS_AS(init_population(never->problem, cfg), InfeasibleConstraints);
    CHECK_THROWS_AS(run(never->problem, cfg), InfeasibleConstraints);
}

TEST_CASE("objectives") {
    Label l;
    l.type = VulnType::Reentrancy;
    std::vector<Label> four(4, l);
    for (std::size_t i = 0; i < 4; ++i)
        four[i].function = "f" + std::to_string(i);
    std::vector<Finding> three;
    for (std::size_t i = 0; i < 3; ++i) {
        Finding f;
        f.vuln = VulnType::Reentrancy;
        f.function = "f" + std::to_string(i);
        f.score = 1.0;
        three.push_back(f);
    }
    CHECK(accuracy_objective(three, four, 10) == 0.75);
    CHECK(accuracy_objective({}, {}, 10) == 1.0);
    CHECK(accuracy_objective(three, {}, 10) == doctest::Approx(0.7));
    CHECK(accuracy_objective(three, {}, 2) == 0.0);
    three[0].score = kReentrancyStaticScore;
    CHECK(accuracy_objective(three, four, 10) == doctest::Approx((0.6 + 2) / 4));

    auto guarded = build(read_corpus("guarded_branch.minisol"));
    const auto& p = guarded->problem;
    InputVector g(p.layout.size(), 0);
    std::size_t key = gene(p, "GuardedBranch.unlock.key");
    g[key] = 12345;
    CHECK(evaluate(p, g).fitness.f2 == doctest::Approx(7.0 / 9).epsilon(1e-15));
    g[key] = 3735928559u;
    CHECK(evaluate(p, g).fitness.f2 == 1.0);
    CHECK(evaluate(p, g).fitness.f1 == 1.0);
}

TEST_CASE("run: zero generations, population size, elitism") {
    auto guarded = build(read_corpus("guarded_branch.minisol"));
    SearchConfig cfg;
    cfg.T = 0;
    auto r0 = run(guarded->problem, cfg);
    CHECK(r0.history.size() == 1);
    CHECK(r0.generations == 0);
    CHECK(r0.population.size() == cfg.N);
    for (std::size_t i = 0; i < r0.population.size(); ++i)
        CHECK(((r0.population[i].rank == 1) ==
               (std::find(r0.front.begin(), r0.front.end(), i) != r0.front.end())));

    for (const char* name : {"guarded_two_keys.minisol", "two_class_vault.minisol", "reentrancy_credit.minisol"}) {
        CAPTURE(name);
        auto b = build(read_corpus(name));
        SearchConfig c;
        c.N = 12;
        c.K = 6;
        c.T = 30;
        c.stagnation_window = 0;
        auto r = run(b->problem, c);
        CHECK(r.population.size() == c.N);
        CHECK(r.generations == 30);
        CHECK(r.history.size() == 31);
        for (std::size_t g = 1; g < r.history.size(); ++g) {
            CHECK(r.history[g].best_f2 >= r.history[g - 1].best_f2);
            CHECK(r.history[g].best_f1 >= r.history[g - 1].best_f1);
        }
    }
}

TEST_CASE("guarded_branch reaches full coverage for every seed") {
    auto b = build(read_corpus("guarded_branch.minisol"));
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SearchConfig cfg;
        cfg.seed = seed;
        auto r = run(b->problem, cfg);
        CHECK(r.history.back().best_f2 == 1.0);
    }
}

TEST_CASE("evolution crosses a window guard the seeds miss") {
    auto b = build("contract W { uint256 hit; function f(uint16 x) public {"
                   " if (x > 40000) { if (x < 40200) { hit = 1; } } } }");
    std::size_t improved = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SearchConfig cfg;
        cfg.seed = seed;
        auto r = run(b->problem, cfg);
        MESSAGE("seed " << seed << ": " << r.history.front().best_f2 << " -> " << r.history.back().best_f2
                        << " after " << r.generations << " generations");
        improved += r.history.front().best_f2 < 1.0 && r.history.back().best_f2 == 1.0;
    }
    CHECK(improved >= 3);
}

TEST_CASE("results are identical for any thread count") {
    auto b = build(read_corpus("two_class_vault.minisol"),
                   {Label{VulnType::Reentrancy, "withdraw", {}}, Label{VulnType::IntegerOverflow, "deposit", {}}});
    SearchConfig cfg;
    cfg.T = 15;
    cfg.seed = 7;
    std::string one = fingerprint(run(b->problem, cfg));
    cfg.threads = 4;
    CHECK(fingerprint(run(b->problem, cfg)) == one);
    cfg.threads = 1;
    CHECK(fingerprint(run(b->problem, cfg)) == one);
    cfg.seed = 8;
    CHECK(fingerprint(run(b->problem, cfg)) != one);
}

TEST_CASE("deep recursion runs on worker threads") {
    auto b = build(read_corpus("callstack_recursion.minisol"));
    SearchConfig cfg;
    cfg.N = 8;
    cfg.K = 4;
    cfg.T = 2;
    cfg.threads = 4;
    auto r = run(b->problem, cfg);
    REQUIRE(r.findings.size() == 1);
    CHECK(r.findings[0].witnessed);
}

TEST_CASE("config validation") {
    SearchConfig cfg;
    cfg.validate();
    cfg.K = 60;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.K = 20;
    cfg.Pm = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
