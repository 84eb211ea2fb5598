#include "sentry/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace sentry {

namespace {

double ratio(double num, double den) { return den == 0 ? 0.0 : num / den; }

} // namespace

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
}

double accuracy(const ConfusionMatrix& m) { return ratio(double(m.tp + m.tn), double(m.total())); }
double precision(const ConfusionMatrix& m) { return ratio(double(m.tp), double(m.tp + m.fp)); }
double recall(const ConfusionMatrix& m) { return ratio(double(m.tp), double(m.tp + m.fn)); }
double tpr(const ConfusionMatrix& m) { return recall(m); }
double fpr(const ConfusionMatrix& m) { return ratio(double(m.fp), double(m.fp + m.tn)); }
double fnr(const ConfusionMatrix& m) { return ratio(double(m.fn), double(m.tp + m.fn)); }
double tnr(const ConfusionMatrix& m) { return ratio(double(m.tn), double(m.fp + m.tn)); }

double f1_score(const ConfusionMatrix& m) {
    double p = precision(m), r = recall(m);
    return ratio(2 * p * r, p + r);
}

double mcc(const ConfusionMatrix& m) {
    using F = long double;
    F tp = F(m.tp), fp = F(m.fp), fn = F(m.fn), tn = F(m.tn);
    F a = tp + fp, b = tp + fn, c = tn + fp, d = tn + fn;
    if (a == 0 || b == 0 || c == 0 || d == 0)
        return 0.0;
    // one sqrt of the whole product keeps the extremes exactly +-1
    F r = (tp * tn - fp * fn) / std::sqrt((a * b) * (c * d));
    return std::clamp(double(r), -1.0, 1.0);
}

double fmi(const ConfusionMatrix& m) { return std::sqrt(precision(m) * recall(m)); }

double auc(const std::vector<ScoredSample>& samples) {
    double pos = 0, neg = 0;
    for (const auto& [s, p] : samples)
        (p ? pos : neg) += 1;
    if (pos == 0 || neg == 0)
        return 0.0;
    std::set<double, std::greater<double>> thresholds;
    for (const auto& [s, p] : samples)
        if (s > 0)
            thresholds.insert(s);
    double area = 0, x0 = 0, y0 = 0;
    for (double t : thresholds) {
        double tp = 0, fp = 0;
        for (const auto& [s, p] : samples)
            if (s >= t)
                (p ? tp : fp) += 1;
        double x = fp / neg, y = tp / pos;
        area += (x - x0) * (y + y0) / 2;
        x0 = x;
        y0 = y;
    }
    area += (1 - x0) * (1 + y0) / 2;
    return area;
}

bool label_matches(const Label& l, const Finding& f) {
    return l.type == f.vuln && (!l.function || *l.function == f.function);
}

std::array<ConfusionMatrix, 4> confuse(const std::vector<ContractFindings>& results, const LabelFile& labels) {
    std::array<ConfusionMatrix, 4> out{};
    for (const auto& r : results) {
        const LabelEntry* le = labels.find(r.path);
        for (auto t : kAllVulnTypes) {
            auto& cm = out[static_cast<std::size_t>(t)];
            bool labeled = false, found = false, matched = false;
            if (le)
                for (const auto& l : le->vulnerabilities)
                    if (l.type == t)
                        labeled = true;
            for (const auto& f : r.findings) {
                if (f.vuln != t)
                    continue;
                found = true;
                if (le)
                    for (const auto& l : le->vulnerabilities)
                        matched |= label_matches(l, f);
            }
            if (matched)
                ++cm.tp;
            else if (labeled && found) {
                ++cm.fp;
                ++cm.fn;
            } else if (found)
                ++cm.fp;
            else if (labeled)
                ++cm.fn;
            else
                ++cm.tn;
        }
    }
    return out;
}

TypeEvaluation summarize(VulnType t, const ConfusionMatrix& cm, std::vector<ScoredSample> samples) {
    TypeEvaluation e;
    e.type = t;
    e.cm = cm;
    e.accuracy = accuracy(cm);
    e.precision = precision(cm);
    e.recall = recall(cm);
    e.f1 = f1_score(cm);
    e.tpr = tpr(cm);
    e.fpr = fpr(cm);
    e.fnr = fnr(cm);
    e.tnr = tnr(cm);
    e.mcc = mcc(cm);
    e.fmi = fmi(cm);
    e.auc = auc(samples);
    e.samples = std::move(samples);
    return e;
}

std::array<TypeEvaluation, 4> evaluate(const std::vector<ContractFindings>& results, const LabelFile& labels) {
    auto cms = confuse(results, labels);
    std::array<TypeEvaluation, 4> out;
    for (auto t : kAllVulnTypes) {
        std::vector<ScoredSample> samples;
        for (const auto& r : results) {
            const LabelEntry* le = labels.find(r.path);
            bool positive = false;
            if (le)
                for (const auto& l : le->vulnerabilities)
                    positive |= l.type == t;
            // Positives score by their best matching finding, negatives by any finding.
            double score = 0;
            for (const auto& f : r.findings) {
                if (f.vuln != t)
                    continue;
                bool counts = !positive;
                if (positive)
                    for (const auto& l : le->vulnerabilities)
                        counts |= label_matches(l, f);
                if (counts)
                    score = std::max(score, f.score);
            }
            samples.emplace_back(score, positive);
        }
        out[static_cast<std::size_t>(t)] = summarize(t, cms[static_cast<std::size_t>(t)], std::move(samples));
    }
    return out;
}

} // namespace sentry
