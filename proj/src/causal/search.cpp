#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <set>

#include "lms/causal/causal.hpp"

namespace lms::causal {
namespace {

using Tester = std::function<CiResult(std::size_t, std::size_t, const std::vector<std::size_t>&)>;
using SepsetMap = std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>>;

std::pair<std::size_t, std::size_t> pkey(std::size_t a, std::size_t b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

// All size-k subsets of `pool` in lexicographic order.
bool next_combination(std::vector<std::size_t>& pick, std::size_t pool_size) {
    const std::size_t k = pick.size();
    for (std::size_t i = k; i-- > 0;) {
        if (pick[i] < pool_size - (k - i)) {
            ++pick[i];
            for (std::size_t j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
            return true;
        }
    }
    return false;
}

struct Skeleton {
    CausalGraph graph;
    SepsetMap sepsets;
};

// PC-stable adjacency search: within each depth, neighbor sets are the ones
// frozen at the start of the depth, so the surviving skeleton does not depend
// on variable order.
Skeleton fas_stable(const std::vector<std::string>& names, const Tester& test,
                    const ResolvedKnowledge& knowledge, int max_cond, SearchDiagnostics* diag) {
    const std::size_t n = names.size();
    Skeleton sk{CausalGraph(names), {}};
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (knowledge.edge_possible(a, b)) sk.graph.add_undirected(a, b);

    for (int depth = 0; depth <= max_cond; ++depth) {
        std::vector<std::vector<std::size_t>> frozen(n);
        for (std::size_t v = 0; v < n; ++v) frozen[v] = sk.graph.neighbors(v);

        bool any_large_enough = false;
        for (const auto& e : sk.graph.edges()) {
            const std::size_t a = e.a, b = e.b;
            bool removed = false;
            for (int side = 0; side < 2 && !removed; ++side) {
                const std::size_t x = side == 0 ? a : b;
                const std::size_t y = side == 0 ? b : a;
                std::vector<std::size_t> pool;
                for (std::size_t v : frozen[x])
                    if (v != y) pool.push_back(v);
                if (pool.size() < static_cast<std::size_t>(depth)) continue;
                any_large_enough = true;
                if (depth == 0) {
                    const CiResult r = test(a, b, {});
                    if (r.independent) {
                        sk.graph.remove_edge(a, b);
                        sk.sepsets[pkey(a, b)] = {};
                        if (diag) diag->removals.push_back({a, b, r.p, {}});
                        removed = true;
                    }
                    break;  // no subsets to enumerate at depth 0; other side identical
                }
                std::vector<std::size_t> pick(static_cast<std::size_t>(depth));
                for (std::size_t i = 0; i < pick.size(); ++i) pick[i] = i;
                do {
                    std::vector<std::size_t> cond;
                    cond.reserve(pick.size());
                    for (std::size_t i : pick) cond.push_back(pool[i]);
                    const CiResult r = test(a, b, cond);
                    if (r.independent) {
                        sk.graph.remove_edge(a, b);
                        sk.sepsets[pkey(a, b)] = cond;
                        if (diag) diag->removals.push_back({a, b, r.p, cond});
                        removed = true;
                        break;
                    }
                } while (next_combination(pick, pool.size()));
            }
        }
        if (!any_large_enough && depth > 0) break;
    }
    return sk;
}

// ------------------------------------------------------------- PC (CPDAG) ---

// Arrow into `head` along (tail, head) is compatible with the knowledge.
bool pc_arrow_allowed(const ResolvedKnowledge& k, std::size_t tail, std::size_t head) {
    return !k.is_forbidden(tail, head);
}

void meek_rules(CausalGraph& g, const ResolvedKnowledge& knowledge) {
    const std::size_t n = g.size();
    auto orient = [&](std::size_t from, std::size_t to) -> bool {
        if (!g.is_undirected(from, to)) return false;
        if (!pc_arrow_allowed(knowledge, from, to)) return false;
        g.add_directed(from, to);
        return true;
    };

    bool changed = true;
    while (changed) {
        changed = false;
        // R1: a -> b - c, a and c nonadjacent  =>  b -> c.
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t a : g.parents(b))
                for (std::size_t c : g.neighbors(b)) {
                    if (c == a || !g.is_undirected(b, c) || g.adjacent(a, c)) continue;
                    changed |= orient(b, c);
                }
        // R2: a -> b -> c with a - c  =>  a -> c.
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b : g.children(a))
                for (std::size_t c : g.children(b)) {
                    if (c == a || !g.is_undirected(a, c)) continue;
                    changed |= orient(a, c);
                }
        // R3: a - b with a - c -> b, a - d -> b, c and d nonadjacent  =>  a -> b.
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b : g.neighbors(a)) {
                if (!g.is_undirected(a, b)) continue;
                const auto parents_b = g.parents(b);
                bool done = false;
                for (std::size_t i = 0; i < parents_b.size() && !done; ++i)
                    for (std::size_t j = i + 1; j < parents_b.size() && !done; ++j) {
                        const std::size_t c = parents_b[i], d = parents_b[j];
                        if (g.adjacent(c, d)) continue;
                        if (!g.is_undirected(a, c) || !g.is_undirected(a, d)) continue;
                        done = orient(a, b);
                        changed |= done;
                    }
            }
        // R4: a - b with a - d -> c -> b and b, d nonadjacent  =>  a -> b.
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b : g.neighbors(a)) {
                if (!g.is_undirected(a, b)) continue;
                bool done = false;
                for (std::size_t d : g.neighbors(a)) {
                    if (done || d == b || !g.is_undirected(a, d) || g.adjacent(b, d)) continue;
                    for (std::size_t c : g.children(d)) {
                        if (g.is_directed(c, b)) {
                            done = orient(a, b);
                            changed |= done;
                            break;
                        }
                    }
                }
            }
    }
}

// --------------------------------------------------------------- FCI (PAG) ---

bool fci_arrow_allowed(const CausalGraph& g, const ResolvedKnowledge& k, std::size_t at,
                       std::size_t other) {
    // An arrowhead at `at` claims `at` is no ancestor of `other`; a required
    // at -> other edge or an already fixed tail says otherwise.
    if (k.is_required(at, other)) return false;
    return g.mark_at(at, other) != Mark::Tail;
}

bool set_arrow(CausalGraph& g, const ResolvedKnowledge& k, std::size_t at, std::size_t other) {
    if (!g.adjacent(at, other)) return false;
    if (g.mark_at(at, other) == Mark::Arrow) return false;
    if (!fci_arrow_allowed(g, k, at, other)) return false;
    g.set_mark(at, other, Mark::Arrow);
    return true;
}

bool set_tail(CausalGraph& g, const ResolvedKnowledge& k, std::size_t at, std::size_t other) {
    if (!g.adjacent(at, other)) return false;
    if (g.mark_at(at, other) == Mark::Tail) return false;
    if (k.is_forbidden(at, other)) return false;  // tail at `at` claims ancestry
    g.set_mark(at, other, Mark::Tail);
    return true;
}

// Discriminating-path rule. Path <theta, ..., w, v, y>: every node strictly
// between theta and v is a collider on the path and a parent of y; theta and
// y nonadjacent. If v sits in sepset(theta, y) the edge v *-* y gets v -> y,
// otherwise <w, v, y> becomes a double collider (w <-> v <-> y).
bool discriminating_rule(CausalGraph& g, const ResolvedKnowledge& k, const SepsetMap& sepsets) {
    const std::size_t n = g.size();
    bool changed = false;
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t y : g.neighbors(v)) {
            if (g.mark_at(v, y) != Mark::Circle) continue;
            for (std::size_t w : g.neighbors(v)) {
                if (w == y) continue;
                // w must be a collider toward v and a parent of y.
                if (g.mark_at(w, v) != Mark::Arrow) continue;
                if (!g.adjacent(w, y) || !g.is_directed(w, y)) continue;

                // DFS backwards over collider-parents chains.
                std::vector<std::size_t> stack{w};
                std::set<std::size_t> visited{v, w, y};
                bool applied = false;
                while (!stack.empty() && !applied) {
                    const std::size_t q = stack.back();
                    stack.pop_back();
                    for (std::size_t t : g.neighbors(q)) {
                        if (visited.count(t)) continue;
                        if (g.mark_at(q, t) != Mark::Arrow) continue;  // needs arrow into q
                        if (!g.adjacent(t, y)) {
                            // Found theta = t.
                            auto it = sepsets.find(pkey(t, y));
                            if (it == sepsets.end()) continue;
                            const bool v_in_sepset =
                                std::find(it->second.begin(), it->second.end(), v) !=
                                it->second.end();
                            if (v_in_sepset) {
                                changed |= set_tail(g, k, v, y);
                                changed |= set_arrow(g, k, y, v);
                            } else {
                                changed |= set_arrow(g, k, v, w);
                                changed |= set_arrow(g, k, w, v);
                                changed |= set_arrow(g, k, v, y);
                                changed |= set_arrow(g, k, y, v);
                            }
                            applied = true;
                            break;
                        }
                        if (g.is_directed(t, y) && g.mark_at(t, q) == Mark::Arrow) {
                            visited.insert(t);
                            stack.push_back(t);
                        }
                    }
                }
                if (applied) break;
            }
        }
    }
    return changed;
}

void fci_rules(CausalGraph& g, const ResolvedKnowledge& k, const SepsetMap& sepsets) {
    const std::size_t n = g.size();
    bool changed = true;
    while (changed) {
        changed = false;
        // R1: a *-> b o-* c, a and c nonadjacent  =>  b -> c.
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t a : g.neighbors(b)) {
                if (g.mark_at(b, a) != Mark::Arrow) continue;
                for (std::size_t c : g.neighbors(b)) {
                    if (c == a || g.adjacent(a, c)) continue;
                    if (g.mark_at(b, c) != Mark::Circle) continue;
                    changed |= set_tail(g, k, b, c);
                    changed |= set_arrow(g, k, c, b);
                }
            }
        // R2: a -> b *-> c or a *-> b -> c, with a *-o c  =>  a *-> c.
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t c : g.neighbors(a)) {
                if (g.mark_at(c, a) != Mark::Circle) continue;
                for (std::size_t b = 0; b < n; ++b) {
                    if (b == a || b == c || !g.adjacent(a, b) || !g.adjacent(b, c)) continue;
                    const bool chain1 = g.is_directed(a, b) && g.mark_at(c, b) == Mark::Arrow;
                    const bool chain2 = g.mark_at(b, a) == Mark::Arrow && g.is_directed(b, c);
                    if (chain1 || chain2) changed |= set_arrow(g, k, c, a);
                }
            }
        // R3: a *-> b <-* c, a *-o d o-* c, a and c nonadjacent, d *-o b
        //     =>  d *-> b.
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t d : g.neighbors(b)) {
                if (g.mark_at(b, d) != Mark::Circle) continue;
                const auto nb = g.neighbors(b);
                bool fired = false;
                for (std::size_t a : nb) {
                    if (fired) break;
                    if (a == d || g.mark_at(b, a) != Mark::Arrow) continue;
                    for (std::size_t c : nb) {
                        if (c == a || c == d || g.adjacent(a, c)) continue;
                        if (g.mark_at(b, c) != Mark::Arrow) continue;
                        if (!g.adjacent(a, d) || !g.adjacent(c, d)) continue;
                        if (g.mark_at(d, a) != Mark::Circle || g.mark_at(d, c) != Mark::Circle)
                            continue;
                        fired = set_arrow(g, k, b, d);
                        changed |= fired;
                        break;
                    }
                }
            }
        // R4: discriminating paths.
        changed |= discriminating_rule(g, k, sepsets);
    }
}

Tester make_tester(const Dataset& data, double alpha, std::shared_ptr<void>& holder,
                   SearchDiagnostics* diag) {
    if (data.all_continuous()) {
        auto t = std::make_shared<FisherZTest>(data.data);
        holder = t;
        return [t, alpha](std::size_t i, std::size_t j, const std::vector<std::size_t>& cond) {
            return t->test(i, j, cond, alpha);
        };
    }
    auto t = std::make_shared<MixedCiTest>(data);
    if (diag)
        for (const auto& w : t->warnings()) diag->warnings.push_back(w);
    holder = t;
    return [t, alpha](std::size_t i, std::size_t j, const std::vector<std::size_t>& cond) {
        return t->test(i, j, cond, alpha);
    };
}

}  // namespace

CausalGraph pc_stable(const Dataset& data, const KnowledgeTiers& knowledge, double alpha,
                      int max_cond, SearchDiagnostics* diag) {
    if (max_cond < 0) throw ConfigError("pc_stable: max_cond must be >= 0");
    const ResolvedKnowledge rk(knowledge, data.names);
    std::shared_ptr<void> holder;
    const Tester tester = make_tester(data, alpha, holder, diag);
    Skeleton sk = fas_stable(data.names, tester, rk, max_cond, diag);
    CausalGraph& g = sk.graph;

    // Knowledge pre-orientation on the skeleton.
    for (const auto& e : g.edges()) {
        if (rk.is_required(e.a, e.b)) g.add_directed(e.a, e.b);
        else if (rk.is_required(e.b, e.a)) g.add_directed(e.b, e.a);
        else if (rk.is_forbidden(e.a, e.b) && !rk.is_forbidden(e.b, e.a))
            g.add_directed(e.b, e.a);
        else if (rk.is_forbidden(e.b, e.a) && !rk.is_forbidden(e.a, e.b))
            g.add_directed(e.a, e.b);
        else if (rk.is_forbidden(e.a, e.b) && rk.is_forbidden(e.b, e.a) && diag)
            diag->warnings.push_back("edge " + g.name(e.a) + " -- " + g.name(e.b) +
                                     " forbidden in both directions; left undirected");
    }

    // Unshielded colliders from the recorded separating sets.
    const std::size_t n = g.size();
    for (std::size_t k = 0; k < n; ++k) {
        const auto nb = g.neighbors(k);
        for (std::size_t x = 0; x < nb.size(); ++x)
            for (std::size_t y = x + 1; y < nb.size(); ++y) {
                const std::size_t i = nb[x], j = nb[y];
                if (g.adjacent(i, j)) continue;
                auto it = sk.sepsets.find(pkey(i, j));
                if (it == sk.sepsets.end()) continue;
                if (std::find(it->second.begin(), it->second.end(), k) != it->second.end())
                    continue;
                for (std::size_t tail : {i, j}) {
                    if (g.is_undirected(tail, k) && pc_arrow_allowed(rk, tail, k))
                        g.add_directed(tail, k);
                    else if (g.is_directed(k, tail) && diag)
                        diag->warnings.push_back("collider conflict at " + g.name(k) +
                                                 " for pair (" + g.name(i) + "," + g.name(j) +
                                                 ")");
                }
            }
    }

    meek_rules(g, rk);
    return g;
}

CausalGraph fci(const Dataset& data, const KnowledgeTiers& knowledge, double alpha, int max_cond,
                SearchDiagnostics* diag) {
    if (max_cond < 0) throw ConfigError("fci: max_cond must be >= 0");
    if (!data.all_continuous())
        throw ConfigError("fci requires continuous variables; use pc_stable for mixed data");
    const ResolvedKnowledge rk(knowledge, data.names);
    std::shared_ptr<void> holder;
    const Tester tester = make_tester(data, alpha, holder, diag);
    Skeleton sk = fas_stable(data.names, tester, rk, max_cond, diag);
    CausalGraph& g = sk.graph;

    // Reorient everything as circles.
    for (const auto& e : g.edges()) g.add_edge(e.a, e.b, Mark::Circle, Mark::Circle);

    // Background knowledge: required a -> b fixes the edge; forbidden a -> b
    // puts an arrowhead at a (a cannot be an ancestor of b).
    for (const auto& e : g.edges()) {
        for (auto [from, to] : {std::pair{e.a, e.b}, std::pair{e.b, e.a}}) {
            if (rk.is_required(from, to)) {
                g.set_mark(from, to, Mark::Tail);
                g.set_mark(to, from, Mark::Arrow);
            } else if (rk.is_forbidden(from, to)) {
                g.set_mark(from, to, Mark::Arrow);
            }
        }
    }

    // R0: unshielded colliders.
    const std::size_t n = g.size();
    for (std::size_t k = 0; k < n; ++k) {
        const auto nb = g.neighbors(k);
        for (std::size_t x = 0; x < nb.size(); ++x)
            for (std::size_t y = x + 1; y < nb.size(); ++y) {
                const std::size_t i = nb[x], j = nb[y];
                if (g.adjacent(i, j)) continue;
                auto it = sk.sepsets.find(pkey(i, j));
                if (it == sk.sepsets.end()) continue;
                if (std::find(it->second.begin(), it->second.end(), k) != it->second.end())
                    continue;
                set_arrow(g, rk, k, i);
                set_arrow(g, rk, k, j);
            }
    }

    fci_rules(g, rk, sk.sepsets);
    return g;
}

CausalGraph pag_to_dag(const CausalGraph& pag, const std::vector<PagOverride>& overrides) {
    CausalGraph g(pag.nodes());

    auto find_override = [&](std::size_t a, std::size_t b) -> const PagOverride* {
        for (const auto& o : overrides) {
            const auto ia = pag.index_of(o.a), ib = pag.index_of(o.b);
            if (!ia || !ib) continue;
            if ((*ia == a && *ib == b) || (*ia == b && *ib == a)) return &o;
        }
        return nullptr;
    };

    for (const auto& e : pag.edges()) {
        const Mark ma = e.at_a, mb = e.at_b;
        if (ma == Mark::Tail && mb == Mark::Arrow) {
            g.add_directed(e.a, e.b);
            continue;
        }
        if (ma == Mark::Arrow && mb == Mark::Tail) {
            g.add_directed(e.b, e.a);
            continue;
        }
        if (ma == Mark::Arrow && mb == Mark::Arrow) {
            g.add_bidirected(e.a, e.b);
            continue;
        }
        const PagOverride* ov = find_override(e.a, e.b);
        if (!ov) {
            // Tail-circle resolves itself: the tail end is an ancestor.
            if (ma == Mark::Tail && mb == Mark::Circle) {
                g.add_directed(e.a, e.b);
                continue;
            }
            if (ma == Mark::Circle && mb == Mark::Tail) {
                g.add_directed(e.b, e.a);
                continue;
            }
            throw ConfigError("pag_to_dag: unresolved circle between '" + pag.name(e.a) +
                              "' and '" + pag.name(e.b) + "'");
        }
        // Apply the override, checking it against the fixed marks.
        const std::size_t oa = *pag.index_of(ov->a);
        const bool forward = oa == e.a;  // override's (a,b) matches edge (a,b)
        using O = PagOverride::Orient;
        O orient = ov->orient;
        if (!forward && orient == O::AtoB) orient = O::BtoA;
        else if (!forward && orient == O::BtoA) orient = O::AtoB;

        auto demand = [&](Mark fixed, Mark wanted, std::size_t node) {
            if (fixed != Mark::Circle && fixed != wanted)
                throw ConfigError("pag_to_dag: override on (" + pag.name(e.a) + "," +
                                  pag.name(e.b) + ") contradicts the mark at '" +
                                  pag.name(node) + "'");
        };
        switch (orient) {
            case O::AtoB:
                demand(ma, Mark::Tail, e.a);
                demand(mb, Mark::Arrow, e.b);
                g.add_directed(e.a, e.b);
                break;
            case O::BtoA:
                demand(mb, Mark::Tail, e.b);
                demand(ma, Mark::Arrow, e.a);
                g.add_directed(e.b, e.a);
                break;
            case O::Bidirected:
                demand(ma, Mark::Arrow, e.a);
                demand(mb, Mark::Arrow, e.b);
                g.add_bidirected(e.a, e.b);
                break;
        }
    }

    if (g.has_directed_cycle()) {
        // Name one cycle for the error message.
        const std::size_t n = g.size();
        std::vector<int> state(n, 0);
        std::vector<std::size_t> path;
        std::string cycle;
        std::function<bool(std::size_t)> visit = [&](std::size_t v) -> bool {
            state[v] = 1;
            path.push_back(v);
            for (std::size_t c : g.children(v)) {
                if (state[c] == 1) {
                    cycle = g.name(c);
                    for (auto it = std::find(path.begin(), path.end(), c); it != path.end(); ++it)
                        if (*it != c) cycle += " -> " + g.name(*it);
                    cycle += " -> " + g.name(c);
                    return true;
                }
                if (state[c] == 0 && visit(c)) return true;
            }
            state[v] = 2;
            path.pop_back();
            return false;
        };
        for (std::size_t v = 0; v < n && cycle.empty(); ++v)
            if (state[v] == 0) visit(v);
        throw ConfigError("pag_to_dag: overrides create a directed cycle: " + cycle);
    }
    return g;
}

}  // namespace lms::causal
