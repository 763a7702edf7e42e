#include "p2pgrid/conic.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace p2pgrid::conic {

int ConicProblem::add_var(std::string name, double lb, double ub, double cost) {
    if (lb > ub) throw std::invalid_argument("variable " + name + ": lb > ub");
    int id = num_vars();
    if (!var_by_name_.emplace(name, id).second)
        throw std::invalid_argument("duplicate variable " + name);
    vars_.push_back({std::move(name), lb, ub, cost});
    return id;
}

void ConicProblem::add_cost(int var, double c) { vars_.at(var).cost += c; }

int ConicProblem::add_eq(std::string label, std::vector<Term> terms, double rhs) {
    int id = static_cast<int>(eqs_.size());
    if (!eq_by_label_.emplace(label, id).second)
        throw std::invalid_argument("duplicate equality label " + label);
    eqs_.push_back({std::move(label), std::move(terms), rhs});
    return id;
}

int ConicProblem::add_le(std::string label, std::vector<Term> terms, double rhs) {
    les_.push_back({std::move(label), std::move(terms), rhs});
    return static_cast<int>(les_.size()) - 1;
}

int ConicProblem::add_cone(std::string label, std::vector<Affine> entries) {
    if (entries.size() < 2) throw std::invalid_argument("cone " + label + " needs >= 2 entries");
    cones_.push_back({std::move(label), std::move(entries)});
    return static_cast<int>(cones_.size()) - 1;
}

int ConicProblem::eq_index(const std::string& label) const {
    auto it = eq_by_label_.find(label);
    return it == eq_by_label_.end() ? -1 : it->second;
}

int ConicProblem::var_index(const std::string& name) const {
    auto it = var_by_name_.find(name);
    return it == var_by_name_.end() ? -1 : it->second;
}

void ConicProblem::validate() const {
    int n = num_vars();
    auto check = [n](const std::vector<Term>& ts, const std::string& where) {
        for (const auto& t : ts)
            if (t.var < 0 || t.var >= n || !std::isfinite(t.coef))
                throw std::logic_error("row " + where + " references undeclared variable");
    };
    for (const auto& r : eqs_) check(r.terms, r.label);
    for (const auto& r : les_) check(r.terms, r.label);
    for (const auto& c : cones_)
        for (const auto& e : c.entries) check(e.terms, c.label);
}

const char* to_string(Status s) {
    switch (s) {
        case Status::optimal: return "optimal";
        case Status::infeasible: return "infeasible";
        case Status::unbounded: return "unbounded";
        case Status::numerical_failure: return "numerical-failure";
    }
    return "?";
}

double eval(const std::vector<Term>& terms, const std::vector<double>& x) {
    double s = 0.0;
    for (const auto& t : terms) s += t.coef * x[t.var];
    return s;
}

double eval(const Affine& a, const std::vector<double>& x) { return eval(a.terms, x) + a.constant; }

static void dump_terms(std::ostream& os, const std::vector<Term>& ts) {
    os << ' ' << ts.size();
    for (const auto& t : ts) os << ' ' << t.var << ' ' << t.coef;
}

void dump(const ConicProblem& p, std::ostream& os) {
    os << std::setprecision(17);
    os << "p2pgrid-conic 1\n";
    os << "vars " << p.num_vars() << '\n';
    for (int i = 0; i < p.num_vars(); ++i) {
        const auto& v = p.vars()[i];
        os << "var " << i << ' ' << v.name << ' ' << v.lb << ' ' << v.ub << ' ' << v.cost << '\n';
    }
    for (const auto& r : p.eqs()) {
        os << "eq " << r.label << ' ' << r.rhs;
        dump_terms(os, r.terms);
        os << '\n';
    }
    for (const auto& r : p.les()) {
        os << "le " << r.label << ' ' << r.rhs;
        dump_terms(os, r.terms);
        os << '\n';
    }
    for (const auto& c : p.cones()) {
        os << "cone " << c.label << ' ' << c.entries.size() << '\n';
        for (const auto& e : c.entries) {
            os << "entry " << e.constant;
            dump_terms(os, e.terms);
            os << '\n';
        }
    }
    os << "end\n";
}

}  // namespace p2pgrid::conic
