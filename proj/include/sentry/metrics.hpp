#pragma once

// Confusion matrices per vulnerability type and the measures derived from them.

#include "sentry/corpus.hpp"
#include "sentry/detectors.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace sentry {

struct ConfusionMatrix {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }
    ConfusionMatrix& operator+=(const ConfusionMatrix& o);
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// A zero denominator yields 0 throughout.
double accuracy(const ConfusionMatrix& m);
double precision(const ConfusionMatrix& m);
double recall(const ConfusionMatrix& m);
double f1_score(const ConfusionMatrix& m);
double tpr(const ConfusionMatrix& m);
double fpr(const ConfusionMatrix& m);
double fnr(const ConfusionMatrix& m);
double tnr(const ConfusionMatrix& m);
double mcc(const ConfusionMatrix& m);
double fmi(const ConfusionMatrix& m);

// Score per sample and whether it is a true positive case.
using ScoredSample = std::pair<double, bool>;

// Area under the ROC curve swept over the distinct scores, trapezoidal,
// from (0,0) to (1,1). Samples scoring 0 are never predicted positive.
double auc(const std::vector<ScoredSample>& samples);

struct ContractFindings {
    std::string path; // must match the label entry path
    std::vector<Finding> findings;
};

struct TypeEvaluation {
    VulnType type = VulnType::Reentrancy;
    ConfusionMatrix cm;
    std::vector<ScoredSample> samples; // one per contract
    double accuracy = 0, precision = 0, recall = 0, f1 = 0;
    double tpr = 0, fpr = 0, fnr = 0, tnr = 0;
    double auc = 0, mcc = 0, fmi = 0;
};

// Same type, and the label names no function or the finding's function.
bool label_matches(const Label& l, const Finding& f);

// Unit of classification is (contract, type). A finding matches a label of
// its type when the label names no function or the same function.
std::array<ConfusionMatrix, 4> confuse(const std::vector<ContractFindings>& results, const LabelFile& labels);

std::array<TypeEvaluation, 4> evaluate(const std::vector<ContractFindings>& results, const LabelFile& labels);

TypeEvaluation summarize(VulnType t, const ConfusionMatrix& cm, std::vector<ScoredSample> samples);

} // namespace sentry
