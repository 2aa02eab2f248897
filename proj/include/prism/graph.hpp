#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prism/data.hpp"
#include "prism/linalg.hpp"
#include "prism/matrix.hpp"

namespace prism {

struct GraphParams {
    double tau = 0.5;         // correlation threshold
    double gamma_corr = 1.0;  // weight exponent on |C|
    int k_min = 1;            // degree floor
    int K = 0;                // degree cap; 0 means default max(4, ceil(D/4))

    int cap_for(int d) const {
        int k = K > 0 ? K : std::max(4, (d + 3) / 4);
        return std::min(k, std::max(1, d - 1));
    }
};

struct DynamicGraph {
    Matrix C;      // Pearson correlations, [-1, 1], unit diagonal
    Matrix A;      // thresholded nonnegative weights, zero diagonal, symmetric
    Matrix A_bar;  // normalized operator, symmetric, rho <= 1
    int window_end = 0;
    GraphParams params;
};

// Pearson correlation matrix over a window; zero-variance columns receive a
// tiny uniform jitter first so the correlation stays defined.
inline Matrix windowed_correlation(const Matrix& window, std::uint64_t jitter_seed = kJitterSeed) {
    if (window.rows < 2)
        throw std::invalid_argument("windowed_correlation: window needs >= 2 rows, got " +
                                    std::to_string(window.rows));
    const int d = window.cols;
    std::vector<std::vector<double>> cols(d);
    for (int c = 0; c < d; ++c) {
        cols[c] = col_of(window, c);
        if (detail::column_constant(cols[c]))
            detail::jitter_column(cols[c], c, kJitterMagnitude, jitter_seed);
    }
    Matrix C(d, d);
    for (int i = 0; i < d; ++i) {
        C.at(i, i) = 1.0;
        for (int j = i + 1; j < d; ++j) {
            double r = detail::pearson(cols[i].data(), cols[j].data(), window.rows);
            r = std::max(-1.0, std::min(1.0, r));
            C.at(i, j) = r;
            C.at(j, i) = r;
        }
    }
    return C;
}

// A(i,j) = 1(|C(i,j)| > tau) * |C(i,j)|^gamma_corr, zero diagonal, then
// symmetrized with max(A, A^T).
inline Matrix threshold_weight(const Matrix& C, double tau, double gamma_corr) {
    if (tau < 0.0 || tau >= 1.0)
        throw std::invalid_argument("threshold_weight: tau must be in [0, 1)");
    if (gamma_corr <= 0.0)
        throw std::invalid_argument("threshold_weight: gamma_corr must be positive");
    const int d = C.rows;
    Matrix A(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            if (i == j) continue;
            const double a = std::abs(C.at(i, j));
            if (a > tau) A.at(i, j) = std::pow(a, gamma_corr);
        }
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            const double m = std::max(A.at(i, j), A.at(j, i));
            A.at(i, j) = m;
            A.at(j, i) = m;
        }
    return A;
}

// Degree floor then cap, row-wise; re-symmetrize by max at the end. Ties in
// neighbor selection break toward the smaller column index.
inline Matrix degree_floor_cap(const Matrix& A, const Matrix& C, const GraphParams& p) {
    const int d = A.rows;
    if (p.k_min < 1 || p.k_min > d - 1)
        throw std::invalid_argument("degree_floor_cap: k_min " + std::to_string(p.k_min) +
                                    " outside [1, " + std::to_string(d - 1) + "]");
    const int cap = p.cap_for(d);
    if (p.k_min > cap)
        throw std::invalid_argument("degree_floor_cap: k_min exceeds cap");
    Matrix B = A;
    for (int i = 0; i < d; ++i) {
        std::vector<int> present, absent;
        for (int j = 0; j < d; ++j) {
            if (j == i) continue;
            (B.at(i, j) > 0.0 ? present : absent).push_back(j);
        }
        int deg = static_cast<int>(present.size());
        if (deg < p.k_min) {
            std::sort(absent.begin(), absent.end(), [&](int x, int y) {
                const double cx = std::abs(C.at(i, x)), cy = std::abs(C.at(i, y));
                if (cx != cy) return cx > cy;
                return x < y;
            });
            const int want = std::min(p.k_min, d - 1);
            for (std::size_t k = 0; k < absent.size() && deg < want; ++k) {
                const int j = absent[k];
                B.at(i, j) = std::pow(std::abs(C.at(i, j)), p.gamma_corr);
                ++deg;
            }
        }
    }
    for (int i = 0; i < d; ++i) {
        std::vector<int> present;
        for (int j = 0; j < d; ++j)
            if (j != i && B.at(i, j) > 0.0) present.push_back(j);
        if (static_cast<int>(present.size()) > cap) {
            std::sort(present.begin(), present.end(), [&](int x, int y) {
                if (B.at(i, x) != B.at(i, y)) return B.at(i, x) > B.at(i, y);
                return x < y;
            });
            for (std::size_t k = cap; k < present.size(); ++k) B.at(i, present[k]) = 0.0;
        }
    }
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            const double m = std::max(B.at(i, j), B.at(j, i));
            B.at(i, j) = m;
            B.at(j, i) = m;
        }
    return B;
}

// A_bar = D^{-1/2} (A + I) D^{-1/2}, D = diag((A + I) 1). Symmetric with
// spectral radius at most 1 (similar to the row-stochastic D^{-1}(A+I)).
inline Matrix normalize_adjacency(const Matrix& A) {
    const int d = A.rows;
    if (A.rows != A.cols) throw std::invalid_argument("normalize_adjacency: not square");
    for (int i = 0; i < d; ++i) {
        if (A.at(i, i) != 0.0)
            throw std::invalid_argument("normalize_adjacency: nonzero diagonal");
        for (int j = 0; j < d; ++j) {
            if (A.at(i, j) < 0.0)
                throw std::invalid_argument("normalize_adjacency: negative weight");
            if (A.at(i, j) != A.at(j, i))
                throw std::invalid_argument("normalize_adjacency: not symmetric");
        }
    }
    std::vector<double> inv_sqrt_deg(d);
    for (int i = 0; i < d; ++i) {
        double deg = 1.0;  // self-loop
        for (int j = 0; j < d; ++j) deg += A.at(i, j);
        inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
    }
    Matrix out(d, d);
    for (int i = 0; i < d; ++i) {
        out.at(i, i) = inv_sqrt_deg[i] * inv_sqrt_deg[i];
        for (int j = i + 1; j < d; ++j) {
            const double v = A.at(i, j) * inv_sqrt_deg[i] * inv_sqrt_deg[j];
            out.at(i, j) = v;
            out.at(j, i) = v;
        }
    }
    return out;
}

inline DynamicGraph build_graph(const Matrix& window, int window_end, const GraphParams& p,
                                std::uint64_t jitter_seed = kJitterSeed) {
    DynamicGraph g;
    g.params = p;
    g.window_end = window_end;
    g.C = windowed_correlation(window, jitter_seed);
    g.A = threshold_weight(g.C, p.tau, p.gamma_corr);
    g.A = degree_floor_cap(g.A, g.C, p);
    g.A_bar = normalize_adjacency(g.A);
    return g;
}

// ---- serialization ---------------------------------------------------------

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < m.cols; ++j) row.push_back(m.at(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    Matrix m;
    m.rows = static_cast<int>(j.size());
    m.cols = m.rows > 0 ? static_cast<int>(j[0].size()) : 0;
    m.data.reserve(static_cast<std::size_t>(m.rows) * m.cols);
    for (const auto& row : j) {
        if (static_cast<int>(row.size()) != m.cols)
            throw std::runtime_error("matrix_from_json: ragged rows");
        for (const auto& v : row) m.data.push_back(v.get<double>());
    }
    return m;
}

}  // namespace detail

inline nlohmann::json graph_to_json(const DynamicGraph& g) {
    return nlohmann::json{{"A", detail::matrix_to_json(g.A)},
                          {"A_bar", detail::matrix_to_json(g.A_bar)},
                          {"C", detail::matrix_to_json(g.C)},
                          {"window_end", g.window_end},
                          {"params",
                           {{"tau", g.params.tau},
                            {"gamma_corr", g.params.gamma_corr},
                            {"k_min", g.params.k_min},
                            {"K", g.params.cap_for(g.A.rows)}}}};
}

inline DynamicGraph graph_from_json(const nlohmann::json& j) {
    DynamicGraph g;
    g.A = detail::matrix_from_json(j.at("A"));
    g.A_bar = detail::matrix_from_json(j.at("A_bar"));
    if (j.contains("C")) g.C = detail::matrix_from_json(j.at("C"));
    g.window_end = j.value("window_end", 0);
    if (j.contains("params")) {
        const auto& p = j.at("params");
        g.params.tau = p.value("tau", 0.5);
        g.params.gamma_corr = p.value("gamma_corr", 1.0);
        g.params.k_min = p.value("k_min", 1);
        g.params.K = p.value("K", 0);
    }
    return g;
}

inline void export_adjacency(const DynamicGraph& g, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("export_adjacency: cannot open " + path);
    f << graph_to_json(g).dump(2) << "\n";
    if (!f) throw std::runtime_error("export_adjacency: write failed for " + path);
}

inline DynamicGraph import_adjacency(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("import_adjacency: cannot open " + path);
    nlohmann::json j;
    f >> j;
    return graph_from_json(j);
}

}  // namespace prism
