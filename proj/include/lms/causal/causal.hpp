#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lms/causal/graph.hpp"

namespace lms::causal {

// Column-typed data for the searches; categorical columns hold non-negative
// level codes.
struct Dataset {
    std::vector<std::string> names;
    Eigen::MatrixXd data;
    std::vector<bool> categorical;

    std::size_t col(const std::string& name) const;
    bool all_continuous() const;
    std::size_t n() const { return static_cast<std::size_t>(data.rows()); }
};

struct CiResult {
    double p = 1.0;
    bool independent = false;
    bool singular = false;  // degenerate conditioning; dependence returned
};

// Partial-correlation test: invert the correlation submatrix over
// {i, j} + cond, Fisher-transform, compare sqrt(n - |cond| - 3) * |z| to the
// standard normal. Holds the correlation matrix so repeated tests are cheap.
class FisherZTest {
public:
    explicit FisherZTest(const Eigen::MatrixXd& data);
    CiResult test(std::size_t i, std::size_t j, const std::vector<std::size_t>& cond,
                  double alpha) const;

private:
    Eigen::MatrixXd corr_;
    std::size_t n_ = 0;
};

// Nested-regression F-test handling categorical blocks via dummy coding:
// regress the response block on the conditioning design with and without the
// other variable's block and compare residual sums.
class MixedCiTest {
public:
    explicit MixedCiTest(const Dataset& data);
    CiResult test(std::size_t i, std::size_t j, const std::vector<std::size_t>& cond,
                  double alpha) const;
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    Eigen::MatrixXd expanded_;                       // dummy-coded matrix
    std::vector<std::vector<Eigen::Index>> blocks_;  // variable -> expanded columns
    std::vector<bool> continuous_;
    std::vector<std::string> warnings_;
};

// One-shot wrappers for the class-based testers above.
CiResult fisher_z_test(const Eigen::MatrixXd& data, std::size_t i, std::size_t j,
                       const std::vector<std::size_t>& cond, double alpha);
CiResult mixed_ci_test(const Dataset& data, std::size_t i, std::size_t j,
                       const std::vector<std::size_t>& cond, double alpha);

struct EdgeRemoval {
    std::size_t a = 0;
    std::size_t b = 0;
    double p = 0.0;
    std::vector<std::size_t> sepset;
};

struct SearchDiagnostics {
    std::vector<EdgeRemoval> removals;
    std::vector<std::string> warnings;
};

// PC-stable: order-independent skeleton (adjacency sets frozen per depth),
// unshielded-collider orientation from recorded separating sets, Meek rules
// R1-R4, knowledge honored throughout. Output is CPDAG-patterned: directed
// and undirected edges only. Chooses the Fisher-z or the mixed test from the
// column types.
CausalGraph pc_stable(const Dataset& data, const KnowledgeTiers& knowledge, double alpha,
                      int max_cond, SearchDiagnostics* diag = nullptr);

// FCI-style search on continuous data: same adjacency phase, all endpoints
// initially circles, collider orientation, then orientation rules R1-R4
// (including the discriminating-path rule) to closure. Output is a PAG.
CausalGraph fci(const Dataset& data, const KnowledgeTiers& knowledge, double alpha, int max_cond,
                SearchDiagnostics* diag = nullptr);

struct PagOverride {
    std::string a;
    std::string b;
    enum class Orient { AtoB, BtoA, Bidirected } orient = Orient::AtoB;
};

// Resolves every circle mark using the overrides; arrow-arrow pairs survive
// as bidirected edges (they become SEM covariances). Throws on an unresolved
// circle, an override contradicting a fixed mark, or a directed cycle (the
// cycle is named).
CausalGraph pag_to_dag(const CausalGraph& pag, const std::vector<PagOverride>& overrides);

struct SemEdge {
    std::string cause;
    std::string effect;
    double coefficient = 0.0;
};

struct SemCovariance {
    std::string a;
    std::string b;
    double covariance = 0.0;
};

struct SemFit {
    std::vector<SemEdge> edges;
    std::vector<SemCovariance> covariances;
    std::map<std::string, double> residual_variance;
    double chi_square = 0.0;
    double df = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

// Linear-Gaussian SEM estimation on a DAG (plus bidirected pairs): per-node
// least squares for the directed coefficients, residual cross-products for
// the bidirected covariances, maximum-likelihood discrepancy chi-square
// against the sample covariance.
SemFit fit_sem(const CausalGraph& dag, const Dataset& data);

}  // namespace lms::causal
