#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lms/core/error.hpp"

namespace lms::causal {

// Endpoint mark of a mixed graph edge. Tail-Arrow is a directed cause,
// Arrow-Arrow a latent confounder, Circle an undetermined endpoint.
enum class Mark { Tail, Arrow, Circle };

const char* to_string(Mark m);

struct Edge {
    std::size_t a = 0;  // a < b
    std::size_t b = 0;
    Mark at_a = Mark::Tail;
    Mark at_b = Mark::Tail;
};

// Mixed graph over named nodes with at most one edge per unordered pair.
// Represents DAGs (tail/arrow only), CPDAGs (plus tail-tail), and PAGs
// (plus circles).
class CausalGraph {
public:
    CausalGraph() = default;
    explicit CausalGraph(std::vector<std::string> nodes);

    std::size_t size() const { return nodes_.size(); }
    const std::vector<std::string>& nodes() const { return nodes_; }
    const std::string& name(std::size_t i) const { return nodes_[i]; }
    std::optional<std::size_t> index_of(const std::string& name) const;
    std::size_t require_index(const std::string& name) const;

    bool adjacent(std::size_t a, std::size_t b) const;
    void add_edge(std::size_t a, std::size_t b, Mark at_a, Mark at_b);
    void remove_edge(std::size_t a, std::size_t b);

    void add_directed(std::size_t from, std::size_t to);    // from -> to
    void add_undirected(std::size_t a, std::size_t b);      // a --- b
    void add_bidirected(std::size_t a, std::size_t b);      // a <-> b

    // Mark at `at`'s end of the edge (at, other); throws when not adjacent.
    Mark mark_at(std::size_t at, std::size_t other) const;
    void set_mark(std::size_t at, std::size_t other, Mark m);

    bool is_directed(std::size_t from, std::size_t to) const;    // from -> to
    bool is_undirected(std::size_t a, std::size_t b) const;
    bool is_bidirected(std::size_t a, std::size_t b) const;
    // Arrowhead at `to` on edge (from, to), any mark at `from`.
    bool has_arrow_into(std::size_t to, std::size_t from) const;

    std::vector<std::size_t> neighbors(std::size_t v) const;
    std::vector<std::size_t> parents(std::size_t v) const;
    std::vector<std::size_t> children(std::size_t v) const;

    std::size_t edge_count() const { return edges_.size(); }
    std::vector<Edge> edges() const;  // ordered by (a, b)

    // Cycle along directed (tail->arrow) edges only.
    bool has_directed_cycle() const;
    // Directed path from -> ... -> to along tail->arrow edges.
    bool directed_path(std::size_t from, std::size_t to) const;

    bool contains_circle() const;

    bool operator==(const CausalGraph& other) const = default;

private:
    static std::pair<std::size_t, std::size_t> key(std::size_t a, std::size_t b) {
        return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    }

    std::vector<std::string> nodes_;
    std::map<std::pair<std::size_t, std::size_t>, std::pair<Mark, Mark>> edges_;
};

// Temporal/causal ordering constraints. Variables in a later tier can never
// cause variables in an earlier tier; explicit forbidden/required directed
// edges refine that.
struct KnowledgeTiers {
    std::vector<std::vector<std::string>> tiers;
    std::vector<std::pair<std::string, std::string>> forbidden;  // cause -> effect banned
    std::vector<std::pair<std::string, std::string>> required;   // cause -> effect demanded

    bool empty() const { return tiers.empty() && forbidden.empty() && required.empty(); }
};

// Per-pair view of the knowledge against a concrete node list. Throws
// ConfigError when a variable sits in two tiers or an edge is both required
// and forbidden.
class ResolvedKnowledge {
public:
    ResolvedKnowledge() = default;
    ResolvedKnowledge(const KnowledgeTiers& k, const std::vector<std::string>& nodes);

    bool is_forbidden(std::size_t cause, std::size_t effect) const;
    bool is_required(std::size_t cause, std::size_t effect) const;
    // Either direction allowed between the pair?
    bool edge_possible(std::size_t a, std::size_t b) const;
    int tier_of(std::size_t v) const { return tier_.empty() ? -1 : tier_[v]; }

    // Directed edges of `g` that violate the knowledge ("knowledge is law").
    std::vector<std::pair<std::size_t, std::size_t>> violations(const CausalGraph& g) const;

private:
    std::size_t n_ = 0;
    std::vector<int> tier_;            // -1 when untiered
    std::vector<char> forbid_;         // n x n, cause-major
    std::vector<char> require_;
    bool at(const std::vector<char>& m, std::size_t i, std::size_t j) const {
        return !m.empty() && m[i * n_ + j] != 0;
    }
};

}  // namespace lms::causal
