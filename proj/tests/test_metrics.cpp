#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sentry/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace sentry;

namespace {

ConfusionMatrix cm(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
    ConfusionMatrix m;
    m.tp = tp;
    m.fp = fp;
    m.fn = fn;
    m.tn = tn;
    return m;
}

// Direct formulas in long double, written out independently of the library.
struct Oracle {
    long double tp, fp, fn, tn;
    explicit Oracle(const ConfusionMatrix& m) : tp(m.tp), fp(m.fp), fn(m.fn), tn(m.tn) {}
    static long double q(long double a, long double b) { return b == 0 ? 0 : a / b; }
    long double acc() const { return q(tp + tn, tp + tn + fp + fn); }
    long double prec() const { return q(tp, tp + fp); }
    long double rec() const { return q(tp, tp + fn); }
    long double f1() const { return q(2 * tp, 2 * tp + fp + fn); } // equivalent closed form
    long double fpr() const { return q(fp, fp + tn); }
    long double fnr() const { return q(fn, tp + fn); }
    long double tnr() const { return q(tn, fp + tn); }
    long double mcc() const {
        long double d = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
        return d == 0 ? 0 : (tp * tn - fp * fn) / std::sqrt(d);
    }
    long double fmi() const { return tp == 0 ? 0 : tp / std::sqrt((tp + fp) * (tp + fn)); }
};

Finding finding(VulnType t, const std::string& fn, double score = 0.5) {
    Finding f;
    f.vuln = t;
    f.function = fn;
    f.score = score;
    return f;
}

LabelFile labels_for(const std::vector<std::pair<std::string, std::vector<Label>>>& xs) {
    LabelFile lf;
    for (const auto& [p, ls] : xs)
        lf.entries.push_back({p, ls});
    std::sort(lf.entries.begin(), lf.entries.end(), [](auto& a, auto& b) { return a.path < b.path; });
    return lf;
}

} // namespace

TEST_CASE("metrics equal the direct-formula oracle on 1000 random matrices") {
    std::mt19937_64 rng(99);
    for (int k = 0; k < 1000; ++k) {
        ConfusionMatrix m = cm(rng() % 101, rng() % 101, rng() % 101, rng() % 101);
        Oracle o(m);
        CAPTURE(m.tp);
        CAPTURE(m.fp);
        CAPTURE(m.fn);
        CAPTURE(m.tn);
        CHECK(std::abs(accuracy(m) - double(o.acc())) < 1e-9);
        CHECK(std::abs(precision(m) - double(o.prec())) < 1e-9);
        CHECK(std::abs(recall(m) - double(o.rec())) < 1e-9);
        CHECK(std::abs(tpr(m) - double(o.rec())) < 1e-9);
        CHECK(std::abs(f1_score(m) - double(o.f1())) < 1e-9);
        CHECK(std::abs(fpr(m) - double(o.fpr())) < 1e-9);
        CHECK(std::abs(fnr(m) - double(o.fnr())) < 1e-9);
        CHECK(std::abs(tnr(m) - double(o.tnr())) < 1e-9);
        CHECK(std::abs(mcc(m) - double(o.mcc())) < 1e-9);
        CHECK(std::abs(fmi(m) - double(o.fmi())) < 1e-9);
        CHECK(mcc(m) >= -1.0);
        CHECK(mcc(m) <= 1.0);
        CHECK(fmi(m) >= 0.0);
        CHECK(fmi(m) <= 1.0);
    }
}

TEST_CASE("worked metric examples") {
    auto perfect = cm(5, 0, 0, 5);
    CHECK(accuracy(perfect) == 1.0);
    CHECK(precision(perfect) == 1.0);
    CHECK(recall(perfect) == 1.0);
    CHECK(f1_score(perfect) == 1.0);
    CHECK(recall(cm(3, 0, 1, 0)) == 0.75);
    CHECK(precision(cm(0, 0, 4, 4)) == 0.0);
    CHECK(mcc(perfect) == 1.0);
    CHECK(mcc(cm(0, 5, 5, 0)) == -1.0);
    CHECK(mcc(cm(1, 1, 1, 1)) == 0.0);
    CHECK(fmi(cm(4, 0, 0, 0)) == 1.0);
    CHECK(fmi(cm(1, 1, 1, 0)) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(fmi(cm(0, 3, 3, 3)) == 0.0);
}

TEST_CASE("MCC is exact at the extremes for many sizes") {
    for (std::uint64_t a = 1; a < 200; ++a)
        for (std::uint64_t b : {1ull, 2ull, 7ull, 50ull, 1000ull}) {
            CHECK(mcc(cm(a, 0, 0, b)) == 1.0);
            CHECK(mcc(cm(0, a, b, 0)) == -1.0);
        }
}

TEST_CASE("MCC under relabelling") {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 500; ++k) {
        std::uint64_t tp = rng() % 50, fp = rng() % 50, fn = rng() % 50, tn = rng() % 50;
        double m = mcc(cm(tp, fp, fn, tn));
        // Swapping which class counts as positive leaves the correlation unchanged.
        CHECK(mcc(cm(tn, fn, fp, tp)) == doctest::Approx(m).epsilon(1e-12));
        // Inverting every prediction negates it.
        CHECK(mcc(cm(fp, tp, tn, fn)) == doctest::Approx(-m).epsilon(1e-12));
    }
}

TEST_CASE("AUC: perfect scorer, single operating point, monotone invariance") {
    std::vector<ScoredSample> perfect;
    for (int i = 0; i < 10; ++i) {
        perfect.emplace_back(1.0, true);
        perfect.emplace_back(0.0, false);
    }
    CHECK(auc(perfect) == 1.0);

    std::vector<ScoredSample> point;
    for (int i = 0; i < 100; ++i) {
        point.emplace_back(i < 85 ? 0.5 : 0.0, true);
        point.emplace_back(i < 5 ? 0.5 : 0.0, false);
    }
    CHECK(auc(point) == doctest::Approx(0.90).epsilon(1e-12));
    CHECK(auc(point) == doctest::Approx((1 + 0.85 - 0.05) / 2).epsilon(1e-12));

    std::mt19937_64 rng(8);
    std::vector<ScoredSample> xs, sq;
    for (int i = 0; i < 300; ++i) {
        bool pos = rng() % 2;
        double s = double(1 + rng() % 40 + (pos ? 8 : 0)) / 64; // exact dyadic scores
        xs.emplace_back(s, pos);
        sq.emplace_back(s * s, pos);
    }
    CHECK(auc(xs) == doctest::Approx(auc(sq)).epsilon(1e-12));
}

TEST_CASE("AUC of random scores is one half, and matches the pairwise oracle") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(1e-9, 1.0);
    std::vector<ScoredSample> xs;
    for (int i = 0; i < 10000; ++i)
        xs.emplace_back(u(rng), i % 2 == 0);
    CHECK(std::abs(auc(xs) - 0.5) <= 0.02);

    // P(score of a positive > score of a negative), ties counted half.
    std::vector<ScoredSample> small(xs.begin(), xs.begin() + 600);
    for (auto& s : small)
        s.first = std::round(s.first * 10) / 10 + 0.01;
    double wins = 0, pairs = 0;
    for (const auto& a : small)
        for (const auto& b : small)
            if (a.second && !b.second) {
                pairs += 1;
                wins += a.first > b.first ? 1.0 : a.first == b.first ? 0.5 : 0.0;
            }
    CHECK(auc(small) == doctest::Approx(wins / pairs).epsilon(1e-9));
}

TEST_CASE("confusion per (contract, type)") {
    std::vector<ContractFindings> none;
    for (int i = 0; i < 5; ++i)
        none.push_back({"c" + std::to_string(i) + ".minisol", {}});
    auto cms = confuse(none, LabelFile{});
    for (auto t : kAllVulnTypes)
        CHECK(cms[static_cast<std::size_t>(t)] == cm(0, 0, 0, 5));

    Label re;
    re.type = VulnType::Reentrancy;
    auto labels = labels_for({{"a.minisol", {re}}});
    auto hit = confuse({{"a.minisol", {finding(VulnType::Reentrancy, "withdraw")}}}, labels);
    CHECK(hit[0] == cm(1, 0, 0, 0));

    Label named = re;
    named.function = "g";
    auto miss = confuse({{"a.minisol", {finding(VulnType::Reentrancy, "f")}}}, labels_for({{"a.minisol", {named}}}));
    CHECK(miss[0] == cm(0, 1, 1, 0));
}

TEST_CASE("evaluate scores positives by their matching finding") {
    Label re;
    re.type = VulnType::Reentrancy;
    auto labels = labels_for({{"a.minisol", {re}}, {"b.minisol", {}}, {"c.minisol", {}}});
    std::vector<ContractFindings> rs = {{"a.minisol", {finding(VulnType::Reentrancy, "w", 1.0)}},
                                        {"b.minisol", {finding(VulnType::Reentrancy, "w", 0.6)}},
                                        {"c.minisol", {}}};
    auto ev = evaluate(rs, labels);
    const auto& r = ev[0];
    CHECK(r.cm == cm(1, 1, 0, 1));
    CHECK(r.recall == 1.0);
    CHECK(r.precision == 0.5);
    // thresholds 1.0 -> (0, 1), 0.6 -> (0.5, 1)
    CHECK(r.auc == 1.0);
}
