#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

namespace p2pgrid::conic {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Term {
    int var;
    double coef;
};

// a'x + constant
struct Affine {
    std::vector<Term> terms;
    double constant = 0.0;
};

// sum(terms) == rhs for equalities, sum(terms) <= rhs for inequalities
struct Row {
    std::string label;
    std::vector<Term> terms;
    double rhs = 0.0;
};

// entries[0] >= || entries[1..] ||
struct Cone {
    std::string label;
    std::vector<Affine> entries;
};

struct Variable {
    std::string name;
    double lb = -kInf;
    double ub = kInf;
    double cost = 0.0;
};

class ConicProblem {
public:
    int add_var(std::string name, double lb = -kInf, double ub = kInf, double cost = 0.0);
    void add_cost(int var, double c);

    int add_eq(std::string label, std::vector<Term> terms, double rhs);
    int add_le(std::string label, std::vector<Term> terms, double rhs);
    int add_cone(std::string label, std::vector<Affine> entries);

    int num_vars() const { return static_cast<int>(vars_.size()); }
    const std::vector<Variable>& vars() const { return vars_; }
    const std::vector<Row>& eqs() const { return eqs_; }
    const std::vector<Row>& les() const { return les_; }
    const std::vector<Cone>& cones() const { return cones_; }

    // -1 when absent
    int eq_index(const std::string& label) const;
    int var_index(const std::string& name) const;

    Variable& var(int i) { return vars_[i]; }
    Row& eq(int i) { return eqs_[i]; }

    void validate() const;

private:
    std::vector<Variable> vars_;
    std::vector<Row> eqs_;
    std::vector<Row> les_;
    std::vector<Cone> cones_;
    std::unordered_map<std::string, int> eq_by_label_;
    std::unordered_map<std::string, int> var_by_name_;
};

enum class Status { optimal, infeasible, unbounded, numerical_failure };

const char* to_string(Status s);

struct SolverOptions {
    double feastol = 1e-9;
    double abstol = 1e-9;
    double reltol = 1e-9;
    int max_iter = 120;
    // a stalled solve within reduced_factor times the tolerances counts as optimal
    double reduced_factor = 100.0;
};

struct SolverStats {
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    double relative_gap = 0.0;
    bool reduced_accuracy = false;
};

// Dual sign conventions:
//   eq_dual[r]  = d(objective)/d(rhs_r)
//   le_dual[r]  = multiplier >= 0, so d(objective)/d(rhs_r) = -le_dual[r]
//   lb_dual/ub_dual likewise multipliers >= 0 of x >= lb and x <= ub
//   cone_dual[k] lies in the same second-order cone
struct Solution {
    Status status = Status::numerical_failure;
    std::vector<double> x;
    std::vector<double> eq_dual;
    std::vector<double> le_dual;
    std::vector<double> lb_dual;
    std::vector<double> ub_dual;
    std::vector<std::vector<double>> cone_dual;
    double objective = 0.0;
    SolverStats stats;

    double value(int var) const { return x[var]; }
};

Solution solve(const ConicProblem& problem, const SolverOptions& opts = {});

// Plain text, one record per line; see docs/problem_dump.md.
void dump(const ConicProblem& problem, std::ostream& os);

double eval(const Affine& a, const std::vector<double>& x);
double eval(const std::vector<Term>& terms, const std::vector<double>& x);

}  // namespace p2pgrid::conic
