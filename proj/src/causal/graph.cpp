#include "lms/causal/graph.hpp"

#include <algorithm>
#include <functional>

namespace lms::causal {

const char* to_string(Mark m) {
    switch (m) {
        case Mark::Tail: return "tail";
        case Mark::Arrow: return "arrow";
        default: return "circle";
    }
}

CausalGraph::CausalGraph(std::vector<std::string> nodes) : nodes_(std::move(nodes)) {}

std::optional<std::size_t> CausalGraph::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i] == name) return i;
    return std::nullopt;
}

std::size_t CausalGraph::require_index(const std::string& name) const {
    auto i = index_of(name);
    if (!i) throw Error("graph has no node named '" + name + "'");
    return *i;
}

bool CausalGraph::adjacent(std::size_t a, std::size_t b) const {
    return a != b && edges_.count(key(a, b)) > 0;
}

void CausalGraph::add_edge(std::size_t a, std::size_t b, Mark at_a, Mark at_b) {
    if (a == b) throw Error("self edge on node " + nodes_[a]);
    if (a < b)
        edges_[key(a, b)] = {at_a, at_b};
    else
        edges_[key(a, b)] = {at_b, at_a};
}

void CausalGraph::remove_edge(std::size_t a, std::size_t b) { edges_.erase(key(a, b)); }

void CausalGraph::add_directed(std::size_t from, std::size_t to) {
    add_edge(from, to, Mark::Tail, Mark::Arrow);
}

void CausalGraph::add_undirected(std::size_t a, std::size_t b) {
    add_edge(a, b, Mark::Tail, Mark::Tail);
}

void CausalGraph::add_bidirected(std::size_t a, std::size_t b) {
    add_edge(a, b, Mark::Arrow, Mark::Arrow);
}

Mark CausalGraph::mark_at(std::size_t at, std::size_t other) const {
    auto it = edges_.find(key(at, other));
    if (it == edges_.end())
        throw Error("no edge between " + nodes_[at] + " and " + nodes_[other]);
    return at < other ? it->second.first : it->second.second;
}

void CausalGraph::set_mark(std::size_t at, std::size_t other, Mark m) {
    auto it = edges_.find(key(at, other));
    if (it == edges_.end())
        throw Error("no edge between " + nodes_[at] + " and " + nodes_[other]);
    (at < other ? it->second.first : it->second.second) = m;
}

bool CausalGraph::is_directed(std::size_t from, std::size_t to) const {
    return adjacent(from, to) && mark_at(from, to) == Mark::Tail && mark_at(to, from) == Mark::Arrow;
}

bool CausalGraph::is_undirected(std::size_t a, std::size_t b) const {
    return adjacent(a, b) && mark_at(a, b) == Mark::Tail && mark_at(b, a) == Mark::Tail;
}

bool CausalGraph::is_bidirected(std::size_t a, std::size_t b) const {
    return adjacent(a, b) && mark_at(a, b) == Mark::Arrow && mark_at(b, a) == Mark::Arrow;
}

bool CausalGraph::has_arrow_into(std::size_t to, std::size_t from) const {
    return adjacent(from, to) && mark_at(to, from) == Mark::Arrow;
}

std::vector<std::size_t> CausalGraph::neighbors(std::size_t v) const {
    std::vector<std::size_t> out;
    for (const auto& [k, marks] : edges_) {
        if (k.first == v) out.push_back(k.second);
        else if (k.second == v) out.push_back(k.first);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> CausalGraph::parents(std::size_t v) const {
    std::vector<std::size_t> out;
    for (std::size_t u : neighbors(v))
        if (is_directed(u, v)) out.push_back(u);
    return out;
}

std::vector<std::size_t> CausalGraph::children(std::size_t v) const {
    std::vector<std::size_t> out;
    for (std::size_t u : neighbors(v))
        if (is_directed(v, u)) out.push_back(u);
    return out;
}

std::vector<Edge> CausalGraph::edges() const {
    std::vector<Edge> out;
    out.reserve(edges_.size());
    for (const auto& [k, marks] : edges_) out.push_back({k.first, k.second, marks.first, marks.second});
    return out;
}

bool CausalGraph::has_directed_cycle() const {
    const std::size_t n = nodes_.size();
    std::vector<int> state(n, 0);  // 0 unseen, 1 in stack, 2 done
    std::function<bool(std::size_t)> visit = [&](std::size_t v) -> bool {
        state[v] = 1;
        for (std::size_t c : children(v)) {
            if (state[c] == 1) return true;
            if (state[c] == 0 && visit(c)) return true;
        }
        state[v] = 2;
        return false;
    };
    for (std::size_t v = 0; v < n; ++v)
        if (state[v] == 0 && visit(v)) return true;
    return false;
}

bool CausalGraph::directed_path(std::size_t from, std::size_t to) const {
    std::vector<char> seen(nodes_.size(), 0);
    std::vector<std::size_t> stack{from};
    seen[from] = 1;
    while (!stack.empty()) {
        const std::size_t v = stack.back();
        stack.pop_back();
        for (std::size_t c : children(v)) {
            if (c == to) return true;
            if (!seen[c]) {
                seen[c] = 1;
                stack.push_back(c);
            }
        }
    }
    return false;
}

bool CausalGraph::contains_circle() const {
    for (const auto& [k, marks] : edges_)
        if (marks.first == Mark::Circle || marks.second == Mark::Circle) return true;
    return false;
}

ResolvedKnowledge::ResolvedKnowledge(const KnowledgeTiers& k, const std::vector<std::string>& nodes)
    : n_(nodes.size()), tier_(nodes.size(), -1) {
    auto find = [&nodes](const std::string& name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i] == name) return i;
        return std::nullopt;
    };
    for (std::size_t t = 0; t < k.tiers.size(); ++t) {
        for (const auto& name : k.tiers[t]) {
            auto i = find(name);
            if (!i) continue;  // knowledge may mention variables absent from this dataset
            if (tier_[*i] != -1)
                throw ConfigError("knowledge: variable '" + name + "' appears in two tiers");
            tier_[*i] = static_cast<int>(t);
        }
    }
    forbid_.assign(n_ * n_, 0);
    require_.assign(n_ * n_, 0);
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j)
            if (i != j && tier_[i] != -1 && tier_[j] != -1 && tier_[i] > tier_[j])
                forbid_[i * n_ + j] = 1;  // later tier cannot cause earlier tier
    for (const auto& [cause, effect] : k.forbidden) {
        auto i = find(cause), j = find(effect);
        if (i && j) forbid_[*i * n_ + *j] = 1;
    }
    for (const auto& [cause, effect] : k.required) {
        auto i = find(cause), j = find(effect);
        if (!i || !j) continue;
        if (forbid_[*i * n_ + *j])
            throw ConfigError("knowledge: edge " + cause + " -> " + effect +
                              " is both required and forbidden");
        require_[*i * n_ + *j] = 1;
    }
}

bool ResolvedKnowledge::is_forbidden(std::size_t cause, std::size_t effect) const {
    return at(forbid_, cause, effect);
}

bool ResolvedKnowledge::is_required(std::size_t cause, std::size_t effect) const {
    return at(require_, cause, effect);
}

bool ResolvedKnowledge::edge_possible(std::size_t a, std::size_t b) const {
    return !(is_forbidden(a, b) && is_forbidden(b, a));
}

std::vector<std::pair<std::size_t, std::size_t>> ResolvedKnowledge::violations(
    const CausalGraph& g) const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& e : g.edges()) {
        if (e.at_a == Mark::Tail && e.at_b == Mark::Arrow && is_forbidden(e.a, e.b))
            out.push_back({e.a, e.b});
        if (e.at_b == Mark::Tail && e.at_a == Mark::Arrow && is_forbidden(e.b, e.a))
            out.push_back({e.b, e.a});
    }
    return out;
}

}  // namespace lms::causal
