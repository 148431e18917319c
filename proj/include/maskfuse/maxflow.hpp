#pragma once

#include <algorithm>
#include <limits>
#include <queue>
#include <vector>

namespace maskfuse {
namespace detail {

/// Dinic max-flow on a residual graph with double capacities. Residual
/// amounts below kEps count as saturated so floating-point dust cannot keep
/// the search alive.
class DinicGraph {
public:
    explicit DinicGraph(int n) : head_(n, -1), level_(n, -1), it_(n, -1) {}

    /// Adds u->v with capacity cap and the paired v->u with capacity rev_cap.
    void add_edge(int u, int v, double cap, double rev_cap) {
        edges_.push_back({v, head_[u], cap});
        head_[u] = static_cast<int>(edges_.size()) - 1;
        edges_.push_back({u, head_[v], rev_cap});
        head_[v] = static_cast<int>(edges_.size()) - 1;
    }

    double max_flow(int s, int t) {
        double flow = 0.0;
        while (bfs(s, t)) {
            it_ = head_;
            while (true) {
                const double pushed = dfs(s, t, std::numeric_limits<double>::infinity());
                if (pushed <= 0.0) break;
                flow += pushed;
            }
        }
        return flow;
    }

    /// After max_flow: true iff u is reachable from the source in the
    /// residual graph (the minimal min-cut source side).
    bool source_side(int u) const { return level_[u] >= 0; }

private:
    static constexpr double kEps = 1e-11;

    struct Edge {
        int to;
        int next;
        double cap;
    };

    bool bfs(int s, int t) {
        std::fill(level_.begin(), level_.end(), -1);
        std::queue<int> q;
        level_[s] = 0;
        q.push(s);
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            for (int e = head_[u]; e != -1; e = edges_[e].next) {
                const Edge& ed = edges_[e];
                if (ed.cap > kEps && level_[ed.to] < 0) {
                    level_[ed.to] = level_[u] + 1;
                    q.push(ed.to);
                }
            }
        }
        return level_[t] >= 0;
    }

    double dfs(int u, int t, double f) {
        if (u == t) return f;
        for (int& e = it_[u]; e != -1; e = edges_[e].next) {
            Edge& ed = edges_[e];
            if (ed.cap > kEps && level_[ed.to] == level_[u] + 1) {
                const double d = dfs(ed.to, t, std::min(f, ed.cap));
                if (d > 0.0) {
                    ed.cap -= d;
                    edges_[e ^ 1].cap += d;
                    return d;
                }
            }
        }
        return 0.0;
    }

    std::vector<int> head_;
    std::vector<int> level_;
    std::vector<int> it_;
    std::vector<Edge> edges_;
};

}  // namespace detail
}  // namespace maskfuse
