#pragma once

// NSGA-II over input vectors, maximizing (accuracy, coverage).

#include "sentry/corpus.hpp"
#include "sentry/detectors.hpp"
#include "sentry/executor.hpp"

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace sentry {

class InfeasibleConstraints : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SearchConfig {
    std::size_t N = 50;  // population size
    std::size_t T = 200; // max generations
    std::size_t K = 20;  // mating pool size
    double Pc = 0.6;
    double Pm = 0.75;
    std::uint64_t seed = 1;
    std::size_t stagnation_window = 40; // 0 disables
    unsigned threads = 1;               // does not affect results

    // Throws std::invalid_argument.
    void validate() const;
};

struct Fitness {
    double f1 = 0; // accuracy
    double f2 = 0; // coverage

    friend bool operator==(const Fitness&, const Fitness&) = default;
};

bool dominates(const Fitness& a, const Fitness& b);

struct Individual {
    InputVector genes;
    Fitness fitness;
    std::size_t rank = 0; // 1 = first front
    double crowding = 0;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

using Rng = std::mt19937_64;

// Independent stream for (seed, generation, index).
Rng substream(std::uint64_t seed, std::uint64_t generation, std::uint64_t index);

// Uniform in [lo, hi].
BigInt uniform_big(Rng& rng, const BigInt& lo, const BigInt& hi);

// A require-style predicate on constructor parameters. Frame 0 is the leaf
// constructor whose parameters are genes; deeper frames are base
// constructors whose arguments are expressions over their caller's frame.
struct CtorFrame {
    std::size_t fn = 0;            // program function index
    std::size_t parent = SIZE_MAX; // frame
    std::vector<IrExpr> args;      // in the parent frame
};

struct Predicate {
    enum class Kind { Dependency, Inheritance };
    Kind kind = Kind::Dependency;
    std::size_t frame = 0;
    IrExpr cond;
    bool want = true; // cond must evaluate nonzero (true) or zero (false)
};

struct ConstraintSet {
    std::vector<BigInt> lo, hi; // per gene
    std::vector<CtorFrame> frames;
    std::vector<Predicate> predicates;
    std::vector<std::size_t> param_gene; // frame-0 parameter -> gene, SIZE_MAX when not a gene
};

ConstraintSet derive_constraints(const Program& prog, const InputLayout& layout);

// Truncates to bounds, repairs dependency equalities, then checks every
// predicate. Returns false when the individual must be rejected.
bool enforce_constraints(InputVector& genes, const Program& prog, const ConstraintSet& cs);

// Everything one contract's search needs, built once and shared read-only.
struct SearchProblem {
    const Program* prog = nullptr;
    InputLayout layout;
    SpecialValues specials;
    ConstraintSet constraints;
    InstrumentedProgram inst;
    Census census;
    Artifacts art;
    std::vector<Finding> static_findings;
    std::vector<Label> labels;
    Limits limits;
};

SearchProblem make_problem(const Program& prog, std::vector<Label> labels, const Limits& limits = {});

struct Evaluation {
    Fitness fitness;
    ExecResult exec;
};

Evaluation evaluate(const SearchProblem& p, const InputVector& genes);

// f1 of a finding set against a contract's labels.
double accuracy_objective(const std::vector<Finding>& findings, const std::vector<Label>& labels,
                          std::uint64_t statements);

std::vector<Individual> init_population(const SearchProblem& p, const SearchConfig& cfg);

// Fronts of indices, each ascending; front 0 is non-dominated.
std::vector<std::vector<std::size_t>> fast_nondominated_sort(const std::vector<Fitness>& fs);

// Distances aligned with `front`.
std::vector<double> crowding_distance(const std::vector<std::size_t>& front, const std::vector<Fitness>& fs);

// Sets rank and crowding on every individual.
void assign_rank_and_crowding(std::vector<Individual>& pop);

std::vector<std::size_t> select_parents(const std::vector<Individual>& pop, std::size_t K, Rng& rng);

std::pair<InputVector, InputVector> crossover(const InputVector& a, const InputVector& b, double Pc, Rng& rng);

void mutate_uniform_integer(InputVector& genes, const ConstraintSet& cs, Rng& rng);
void mutate_random_order(InputVector& genes, const ConstraintSet& cs, std::size_t p, std::size_t q, Rng& rng);
void mutate(InputVector& genes, double Pm, const ConstraintSet& cs, Rng& rng);

// Truncates 2N candidates to N by front, then crowding.
std::vector<Individual> environmental_selection(std::vector<Individual> combined, std::size_t N);

struct GenerationStats {
    std::size_t generation = 0;
    double best_f1 = 0, mean_f1 = 0;
    double best_f2 = 0, mean_f2 = 0;
};

struct SearchResult {
    std::vector<Individual> population;
    std::vector<std::size_t> front; // indices into population, rank 1
    std::vector<GenerationStats> history; // generation 0 first
    std::size_t generations = 0;          // completed after generation 0
    bool stagnated = false;
    std::uint64_t evaluations = 0;
    std::vector<Finding> findings;  // static findings upgraded by every evaluated trace
    CoverageCounters union_counters;
};

SearchResult run(const SearchProblem& p, const SearchConfig& cfg);

} // namespace sentry
