#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "prism/matrix.hpp"
#include "prism/rng.hpp"

namespace prism {

// Records which rows of the raw series a pipeline phase touched. The trainer
// attaches one during training and asserts max_row < train_len afterwards.
struct RowAudit {
    long reads = 0;
    int max_row = -1;
    void note(int lo, int hi) {  // [lo, hi)
        (void)lo;
        ++reads;
        if (hi - 1 > max_row) max_row = hi - 1;
    }
};

struct Dataset {
    Matrix values;  // T x D
    std::vector<std::string> channel_names;
    int train_len = 0;  // rows [0, train_len) are the training prefix

    int T() const { return values.rows; }
    int D() const { return values.cols; }

    // Audited row access; every consumer of the raw series goes through here.
    Matrix rows(int lo, int hi, RowAudit* audit = nullptr) const {
        Matrix m = take_rows(values, lo, hi);
        if (audit) audit->note(lo, hi);
        return m;
    }
};

struct WindowPair {
    Matrix history;  // L x D, rows [end_index-L+1, end_index]
    Matrix future;   // H x D, rows [end_index+1, end_index+H]
    int end_index = 0;
};

struct PhysicsBudgets {
    std::vector<double> m;      // per-channel minima
    std::vector<double> M;      // per-channel maxima
    std::vector<double> v_max;  // first-difference caps
    std::vector<double> a_max;  // second-difference caps
    std::vector<std::vector<int>> lags;
    int tau_max = 0;
};

// ---- CSV ingestion ------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

inline bool parse_double(const std::string& s, double* out) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        if (pos != s.size()) return false;
        *out = v;
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace detail

inline Dataset load_csv(const std::string& path, bool has_header) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_csv: cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        lines.push_back(line);
    }
    if (lines.empty()) throw std::runtime_error("load_csv: empty file " + path);

    Dataset ds;
    std::size_t start = 0;
    if (has_header) {
        ds.channel_names = detail::split_csv_line(lines[0]);
        start = 1;
        if (lines.size() == start) throw std::runtime_error("load_csv: no data rows in " + path);
    }
    int cols = -1;
    std::vector<double> data;
    for (std::size_t r = start; r < lines.size(); ++r) {
        auto fields = detail::split_csv_line(lines[r]);
        const int row_index = static_cast<int>(r - start);
        if (cols < 0) {
            cols = static_cast<int>(fields.size());
        } else if (static_cast<int>(fields.size()) != cols) {
            throw std::runtime_error("load_csv: ragged row " + std::to_string(row_index) +
                                     " has " + std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(cols));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            double v;
            if (!detail::parse_double(fields[c], &v))
                throw std::runtime_error("load_csv: non-numeric cell at row " +
                                         std::to_string(row_index) + ", column " +
                                         std::to_string(c) + " (\"" + fields[c] + "\")");
            if (!std::isfinite(v))
                throw std::runtime_error("load_csv: non-finite value at row " +
                                         std::to_string(row_index) + ", column " +
                                         std::to_string(c));
            data.push_back(v);
        }
    }
    ds.values.rows = static_cast<int>(data.size()) / cols;
    ds.values.cols = cols;
    ds.values.data = std::move(data);
    if (ds.channel_names.empty())
        for (int c = 0; c < cols; ++c) ds.channel_names.push_back("ch" + std::to_string(c));
    ds.train_len = ds.values.rows;  // caller sets the holdout split
    return ds;
}

inline void save_csv(const Matrix& m, const std::string& path,
                     const std::vector<std::string>& header = {}) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_csv: cannot open " + path);
    f.precision(17);
    if (!header.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c)
            f << header[c] << (c + 1 < header.size() ? "," : "\n");
    }
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) f << m.at(r, c) << (c + 1 < m.cols ? "," : "\n");
    if (!f) throw std::runtime_error("save_csv: write failed for " + path);
}

// ---- splits and windows ---------------------------------------------------

inline std::pair<Matrix, Matrix> split_train_test(const Dataset& ds, int holdout) {
    if (holdout <= 0 || holdout >= ds.T())
        throw std::invalid_argument("split_train_test: holdout " + std::to_string(holdout) +
                                    " outside (0, " + std::to_string(ds.T()) + ")");
    return {take_rows(ds.values, 0, ds.T() - holdout),
            take_rows(ds.values, ds.T() - holdout, ds.T())};
}

inline std::vector<WindowPair> make_windows(const Matrix& prefix, int L, int H) {
    if (L < 1 || H < 1) throw std::invalid_argument("make_windows: L and H must be positive");
    if (prefix.rows < L + H)
        throw std::invalid_argument("make_windows: prefix has " + std::to_string(prefix.rows) +
                                    " rows, needs at least " + std::to_string(L + H));
    std::vector<WindowPair> out;
    // end_index e is the 0-based row of the last history observation.
    for (int e = L - 1; e + H < prefix.rows; ++e) {
        WindowPair w;
        w.history = take_rows(prefix, e - L + 1, e + 1);
        w.future = take_rows(prefix, e + 1, e + 1 + H);
        w.end_index = e;
        out.push_back(std::move(w));
    }
    return out;
}

// ---- offline statistics ----------------------------------------------------

inline std::pair<std::vector<double>, std::vector<double>> empirical_bounds(const Matrix& prefix) {
    if (prefix.rows == 0) throw std::invalid_argument("empirical_bounds: empty prefix");
    std::vector<double> lo(prefix.cols), hi(prefix.cols);
    for (int c = 0; c < prefix.cols; ++c) {
        double mn = prefix.at(0, c), mx = prefix.at(0, c);
        for (int r = 1; r < prefix.rows; ++r) {
            mn = std::min(mn, prefix.at(r, c));
            mx = std::max(mx, prefix.at(r, c));
        }
        lo[c] = mn;
        hi[c] = mx;
    }
    return {lo, hi};
}

// Nearest-rank quantile: value at index ceil(q*n) of the ascending sort.
inline double nearest_rank_quantile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("nearest_rank_quantile: empty sample");
    std::sort(v.begin(), v.end());
    long rank = static_cast<long>(std::ceil(q * static_cast<double>(v.size())));
    rank = std::max(1L, std::min(rank, static_cast<long>(v.size())));
    return v[static_cast<std::size_t>(rank - 1)];
}

inline std::pair<std::vector<double>, std::vector<double>> robust_kinematics(
    const Matrix& prefix, double quantile = 0.995) {
    if (prefix.rows < 3)
        throw std::invalid_argument("robust_kinematics: needs at least 3 rows, got " +
                                    std::to_string(prefix.rows));
    std::vector<double> v_max(prefix.cols), a_max(prefix.cols);
    for (int c = 0; c < prefix.cols; ++c) {
        std::vector<double> d1, d2;
        d1.reserve(prefix.rows - 1);
        d2.reserve(prefix.rows - 2);
        for (int r = 1; r < prefix.rows; ++r)
            d1.push_back(prefix.at(r, c) - prefix.at(r - 1, c));
        for (std::size_t k = 1; k < d1.size(); ++k) d2.push_back(std::abs(d1[k] - d1[k - 1]));
        for (double& v : d1) v = std::abs(v);
        v_max[c] = nearest_rank_quantile(d1, quantile);
        a_max[c] = nearest_rank_quantile(d2, quantile);
    }
    return {v_max, a_max};
}

namespace detail {

inline double pearson(const double* x, const double* y, int n) {
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
        sxy += x[i] * y[i];
    }
    const double num = n * sxy - sx * sy;
    const double dx = n * sxx - sx * sx;
    const double dy = n * syy - sy * sy;
    if (dx <= 0.0 || dy <= 0.0) return 0.0;
    return num / (std::sqrt(dx) * std::sqrt(dy));
}

inline bool column_constant(const std::vector<double>& v) {
    for (double x : v)
        if (x != v[0]) return false;
    return true;
}

// Uniform jitter in [-magnitude, magnitude], seeded per column so results do
// not depend on which other columns were degenerate.
inline void jitter_column(std::vector<double>& v, int col, double magnitude,
                          std::uint64_t seed) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(col)));
    for (double& x : v) x += rng.uniform(-magnitude, magnitude);
}

}  // namespace detail

inline constexpr std::uint64_t kJitterSeed = 0x7157ULL;
inline constexpr double kJitterMagnitude = 1e-8;

// Correlation of channel i against channel j shifted by tau, evaluated over
// the overlapping region: pairs (x_i[t - tau], x_j[t]).
inline double lag_correlation(const std::vector<double>& xi, const std::vector<double>& xj,
                              int tau) {
    const int n = static_cast<int>(xi.size());
    const int lo = std::max(0, tau);
    const int hi = n + std::min(0, tau);
    const int overlap = hi - lo;
    if (overlap < 2) return 0.0;
    std::vector<double> a(overlap), b(overlap);
    for (int t = lo; t < hi; ++t) {
        a[t - lo] = xi[static_cast<std::size_t>(t - tau)];
        b[t - lo] = xj[static_cast<std::size_t>(t)];
    }
    return detail::pearson(a.data(), b.data(), overlap);
}

// lags[i][j] > 0 means channel j trails channel i by that many steps
// (x_j(t) tracks x_i(t - lag)). Ties go to smaller |tau|, then negative tau;
// iterating 0, -1, +1, -2, +2, ... with strict improvement implements both.
inline std::vector<std::vector<int>> estimate_integer_lags(const Matrix& prefix, int tau_max,
                                                           std::uint64_t jitter_seed = kJitterSeed) {
    if (tau_max < 0) throw std::invalid_argument("estimate_integer_lags: tau_max must be >= 0");
    if (prefix.rows < 2 * tau_max + 2)
        throw std::invalid_argument("estimate_integer_lags: prefix has " +
                                    std::to_string(prefix.rows) + " rows, needs at least " +
                                    std::to_string(2 * tau_max + 2));
    const int d = prefix.cols;
    std::vector<std::vector<double>> cols(d);
    for (int c = 0; c < d; ++c) {
        cols[c] = col_of(prefix, c);
        if (detail::column_constant(cols[c]))
            detail::jitter_column(cols[c], c, kJitterMagnitude, jitter_seed);
    }
    std::vector<int> taus;
    taus.push_back(0);
    for (int k = 1; k <= tau_max; ++k) {
        taus.push_back(-k);
        taus.push_back(k);
    }
    std::vector<std::vector<int>> lags(d, std::vector<int>(d, 0));
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            if (i == j) continue;
            double best = -2.0;
            int best_tau = 0;
            for (int tau : taus) {
                const double c = lag_correlation(cols[i], cols[j], tau);
                if (c > best) {
                    best = c;
                    best_tau = tau;
                }
            }
            lags[i][j] = best_tau;
        }
    }
    return lags;
}

// ---- normalization ---------------------------------------------------------

struct Normalization {
    std::vector<double> mean;
    std::vector<double> std;  // floored at 1e-8
};

inline std::pair<Matrix, Normalization> zscore(const Matrix& m) {
    Normalization nz;
    nz.mean.resize(m.cols);
    nz.std.resize(m.cols);
    for (int c = 0; c < m.cols; ++c) {
        double mu = 0.0;
        for (int r = 0; r < m.rows; ++r) mu += m.at(r, c);
        mu /= std::max(1, m.rows);
        double var = 0.0;
        for (int r = 0; r < m.rows; ++r) var += (m.at(r, c) - mu) * (m.at(r, c) - mu);
        var /= std::max(1, m.rows);
        nz.mean[c] = mu;
        nz.std[c] = std::max(std::sqrt(var), 1e-8);
    }
    Matrix out(m.rows, m.cols);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) out.at(r, c) = (m.at(r, c) - nz.mean[c]) / nz.std[c];
    return {out, nz};
}

inline Matrix zscore_apply(const Matrix& m, const Normalization& nz) {
    if (m.cols != static_cast<int>(nz.mean.size()))
        throw std::invalid_argument("zscore_apply: channel count mismatch");
    Matrix out(m.rows, m.cols);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) out.at(r, c) = (m.at(r, c) - nz.mean[c]) / nz.std[c];
    return out;
}

inline Matrix zscore_invert(const Matrix& m, const Normalization& nz) {
    if (m.cols != static_cast<int>(nz.mean.size()))
        throw std::invalid_argument("zscore_invert: channel count mismatch");
    Matrix out(m.rows, m.cols);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) out.at(r, c) = m.at(r, c) * nz.std[c] + nz.mean[c];
    return out;
}

// ---- budgets ----------------------------------------------------------------

inline PhysicsBudgets compute_budgets(const Matrix& prefix, int tau_max,
                                      double quantile = 0.995) {
    PhysicsBudgets b;
    std::tie(b.m, b.M) = empirical_bounds(prefix);
    std::tie(b.v_max, b.a_max) = robust_kinematics(prefix, quantile);
    b.lags = estimate_integer_lags(prefix, tau_max);
    b.tau_max = tau_max;
    return b;
}

inline nlohmann::json budgets_to_json(const PhysicsBudgets& b) {
    return nlohmann::json{{"m", b.m},       {"M", b.M},           {"v_max", b.v_max},
                          {"a_max", b.a_max}, {"lags", b.lags},   {"tau_max", b.tau_max}};
}

inline PhysicsBudgets budgets_from_json(const nlohmann::json& j) {
    PhysicsBudgets b;
    b.m = j.at("m").get<std::vector<double>>();
    b.M = j.at("M").get<std::vector<double>>();
    b.v_max = j.at("v_max").get<std::vector<double>>();
    b.a_max = j.at("a_max").get<std::vector<double>>();
    b.lags = j.at("lags").get<std::vector<std::vector<int>>>();
    b.tau_max = j.at("tau_max").get<int>();
    return b;
}

}  // namespace prism
