#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "prism/matrix.hpp"

namespace prism::ad {

class Tape;

namespace detail {

struct Node {
    int rows = 0;
    int cols = 0;
    std::vector<double> val;
    std::vector<double> grad;
    bool requires_grad = false;
    std::string name;
    Tape* tape = nullptr;

    std::size_t size() const { return val.size(); }
};

}  // namespace detail

// Handle to a value recorded on a Tape. Cheap to copy; the underlying node is
// shared. All tensors are 2-D (scalars are 1x1).
class Tensor {
public:
    Tensor() = default;

    bool defined() const { return static_cast<bool>(n_); }
    int rows() const { return n_->rows; }
    int cols() const { return n_->cols; }
    std::size_t size() const { return n_->size(); }
    bool is_scalar() const { return n_->rows == 1 && n_->cols == 1; }

    const std::vector<double>& val() const { return n_->val; }
    const std::vector<double>& grad() const { return n_->grad; }
    bool requires_grad() const { return n_->requires_grad; }
    const std::string& name() const { return n_->name; }

    double item() const {
        if (!is_scalar()) throw std::invalid_argument("Tensor::item: tensor is not scalar");
        return n_->val[0];
    }

    Matrix to_matrix() const {
        Matrix m(rows(), cols());
        m.data = n_->val;
        return m;
    }

private:
    friend class Tape;
    explicit Tensor(std::shared_ptr<detail::Node> n) : n_(std::move(n)) {}
    std::shared_ptr<detail::Node> n_;
};

// Wengert list: records every primitive op in execution order and replays the
// registered backward rules in exact reverse order. Single-threaded by
// contract; independent tapes are independent.
class Tape {
    using NodePtr = std::shared_ptr<detail::Node>;

public:
    Tensor input(const Matrix& m, bool requires_grad = false, std::string name = "") {
        NodePtr n = make_node(m.rows, m.cols, requires_grad, std::move(name));
        n->val = m.data;
        return Tensor(n);
    }

    Tensor input(int rows, int cols, const std::vector<double>& data, bool requires_grad = false,
                 std::string name = "") {
        if (static_cast<std::size_t>(rows) * cols != data.size())
            throw std::invalid_argument("Tape::input: data length does not match shape");
        NodePtr n = make_node(rows, cols, requires_grad, std::move(name));
        n->val = data;
        return Tensor(n);
    }

    Tensor scalar(double v, bool requires_grad = false, std::string name = "") {
        NodePtr n = make_node(1, 1, requires_grad, std::move(name));
        n->val[0] = v;
        return Tensor(n);
    }

    Tensor zeros(int rows, int cols) { return Tensor(make_node(rows, cols, false, "")); }

    std::size_t num_ops() const { return entries_.size(); }

    // ---- primitives ---------------------------------------------------

    Tensor matmul(const Tensor& a, const Tensor& b) {
        check_tape(a, "matmul");
        check_tape(b, "matmul");
        if (a.cols() != b.rows())
            throw std::invalid_argument("matmul: shape mismatch (" + dims(a) + " vs " + dims(b) +
                                        ")");
        NodePtr out = make_node(a.rows(), b.cols());
        const auto an = a.n_, bn = b.n_;
        const int m = a.rows(), k = a.cols(), p = b.cols();
        for (int i = 0; i < m; ++i) {
            for (int t = 0; t < k; ++t) {
                const double av = an->val[static_cast<std::size_t>(i) * k + t];
                if (av == 0.0) continue;
                const double* brow = &bn->val[static_cast<std::size_t>(t) * p];
                double* crow = &out->val[static_cast<std::size_t>(i) * p];
                for (int j = 0; j < p; ++j) crow[j] += av * brow[j];
            }
        }
        record([an, bn, out, m, k, p]() {
            // dA += dC * B^T ; dB += A^T * dC
            for (int i = 0; i < m; ++i) {
                const double* gout = &out->grad[static_cast<std::size_t>(i) * p];
                for (int t = 0; t < k; ++t) {
                    const double* brow = &bn->val[static_cast<std::size_t>(t) * p];
                    double acc = 0.0;
                    for (int j = 0; j < p; ++j) acc += gout[j] * brow[j];
                    an->grad[static_cast<std::size_t>(i) * k + t] += acc;
                }
            }
            for (int t = 0; t < k; ++t) {
                double* gb = &bn->grad[static_cast<std::size_t>(t) * p];
                for (int i = 0; i < m; ++i) {
                    const double av = an->val[static_cast<std::size_t>(i) * k + t];
                    if (av == 0.0) continue;
                    const double* gout = &out->grad[static_cast<std::size_t>(i) * p];
                    for (int j = 0; j < p; ++j) gb[j] += av * gout[j];
                }
            }
        });
        return Tensor(out);
    }

    Tensor add(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, "add", +1.0); }
    Tensor sub(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, "sub", -1.0); }

    // Elementwise (Hadamard) product.
    Tensor mul(const Tensor& a, const Tensor& b) {
        check_tape(a, "mul");
        check_tape(b, "mul");
        require_same_shape(a, b, "mul");
        NodePtr out = make_node(a.rows(), a.cols());
        const auto an = a.n_, bn = b.n_;
        for (std::size_t i = 0; i < out->size(); ++i) out->val[i] = an->val[i] * bn->val[i];
        record([an, bn, out]() {
            for (std::size_t i = 0; i < out->size(); ++i) {
                an->grad[i] += out->grad[i] * bn->val[i];
                bn->grad[i] += out->grad[i] * an->val[i];
            }
        });
        return Tensor(out);
    }

    // Multiply by a compile-time constant.
    Tensor scale(const Tensor& a, double c) {
        check_tape(a, "scale");
        NodePtr out = make_node(a.rows(), a.cols());
        const auto an = a.n_;
        for (std::size_t i = 0; i < out->size(); ++i) out->val[i] = c * an->val[i];
        record([an, out, c]() {
            for (std::size_t i = 0; i < out->size(); ++i) an->grad[i] += c * out->grad[i];
        });
        return Tensor(out);
    }

    // Multiply by a learnable scalar tensor (broadcast).
    Tensor smul(const Tensor& s, const Tensor& a) {
        check_tape(s, "smul");
        check_tape(a, "smul");
        if (!s.is_scalar()) throw std::invalid_argument("smul: first argument must be scalar");
        NodePtr out = make_node(a.rows(), a.cols());
        const auto sn = s.n_, an = a.n_;
        const double sv = sn->val[0];
        for (std::size_t i = 0; i < out->size(); ++i) out->val[i] = sv * an->val[i];
        record([sn, an, out]() {
            const double sv = sn->val[0];
            double acc = 0.0;
            for (std::size_t i = 0; i < out->size(); ++i) {
                acc += out->grad[i] * an->val[i];
                an->grad[i] += sv * out->grad[i];
            }
            sn->grad[0] += acc;
        });
        return Tensor(out);
    }

    Tensor relu(const Tensor& a) {
        return unary(
            a, [](double x) { return x > 0.0 ? x : 0.0; },
            [](double x, double /*y*/) { return x > 0.0 ? 1.0 : 0.0; });
    }

    Tensor softplus(const Tensor& a) {
        return unary(
            a,
            [](double x) {
                if (x > 30.0) return x;  // avoids exp overflow; exact to double precision
                return std::log1p(std::exp(x));
            },
            [](double x, double /*y*/) { return 1.0 / (1.0 + std::exp(-x)); });
    }

    Tensor sigmoid(const Tensor& a) {
        return unary(
            a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
            [](double /*x*/, double y) { return y * (1.0 - y); });
    }

    Tensor exp(const Tensor& a) {
        return unary(
            a, [](double x) { return std::exp(x); }, [](double /*x*/, double y) { return y; });
    }

    Tensor sqrt(const Tensor& a) {
        return unary(
            a, [](double x) { return std::sqrt(x); },
            [](double /*x*/, double y) { return 0.5 / y; });
    }

    Tensor abs(const Tensor& a) {
        return unary(
            a, [](double x) { return std::abs(x); },
            [](double x, double /*y*/) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
    }

    Tensor square(const Tensor& a) {
        return unary(
            a, [](double x) { return x * x; }, [](double x, double /*y*/) { return 2.0 * x; });
    }

    Tensor sum(const Tensor& a) {
        check_tape(a, "sum");
        NodePtr out = make_node(1, 1);
        const auto an = a.n_;
        double acc = 0.0;
        for (double v : an->val) acc += v;  // fixed left-to-right order
        out->val[0] = acc;
        record([an, out]() {
            const double g = out->grad[0];
            for (std::size_t i = 0; i < an->size(); ++i) an->grad[i] += g;
        });
        return Tensor(out);
    }

    Tensor mean(const Tensor& a) {
        check_tape(a, "mean");
        if (a.size() == 0) throw std::invalid_argument("mean: empty tensor");
        NodePtr out = make_node(1, 1);
        const auto an = a.n_;
        double acc = 0.0;
        for (double v : an->val) acc += v;
        const double inv_n = 1.0 / static_cast<double>(an->size());
        out->val[0] = acc * inv_n;
        record([an, out, inv_n]() {
            const double g = out->grad[0] * inv_n;
            for (std::size_t i = 0; i < an->size(); ++i) an->grad[i] += g;
        });
        return Tensor(out);
    }

    // Submatrix copy of rows [r0, r1) x cols [c0, c1).
    Tensor slice(const Tensor& a, int r0, int r1, int c0, int c1) {
        check_tape(a, "slice");
        if (r0 < 0 || r1 > a.rows() || r0 >= r1 || c0 < 0 || c1 > a.cols() || c0 >= c1)
            throw std::invalid_argument("slice: range [" + std::to_string(r0) + "," +
                                        std::to_string(r1) + ")x[" + std::to_string(c0) + "," +
                                        std::to_string(c1) + ") invalid for " + dims(a));
        NodePtr out = make_node(r1 - r0, c1 - c0);
        const auto an = a.n_;
        const int ac = a.cols(), oc = out->cols;
        for (int i = 0; i < out->rows; ++i)
            for (int j = 0; j < oc; ++j)
                out->val[static_cast<std::size_t>(i) * oc + j] =
                    an->val[static_cast<std::size_t>(i + r0) * ac + (j + c0)];
        record([an, out, r0, c0, ac, oc]() {
            for (int i = 0; i < out->rows; ++i)
                for (int j = 0; j < oc; ++j)
                    an->grad[static_cast<std::size_t>(i + r0) * ac + (j + c0)] +=
                        out->grad[static_cast<std::size_t>(i) * oc + j];
        });
        return Tensor(out);
    }

    Tensor concat_cols(const std::vector<Tensor>& parts) {
        if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
        int total = 0;
        for (const auto& p : parts) {
            check_tape(p, "concat_cols");
            if (p.rows() != parts[0].rows())
                throw std::invalid_argument("concat_cols: row mismatch (" + dims(parts[0]) +
                                            " vs " + dims(p) + ")");
            total += p.cols();
        }
        NodePtr out = make_node(parts[0].rows(), total);
        std::vector<NodePtr> ns;
        ns.reserve(parts.size());
        for (const auto& p : parts) ns.push_back(p.n_);
        const int rows = parts[0].rows();
        int off = 0;
        for (const auto& n : ns) {
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < n->cols; ++j)
                    out->val[static_cast<std::size_t>(i) * total + off + j] =
                        n->val[static_cast<std::size_t>(i) * n->cols + j];
            off += n->cols;
        }
        record([ns, out, rows, total]() {
            int off = 0;
            for (const auto& n : ns) {
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < n->cols; ++j)
                        n->grad[static_cast<std::size_t>(i) * n->cols + j] +=
                            out->grad[static_cast<std::size_t>(i) * total + off + j];
                off += n->cols;
            }
        });
        return Tensor(out);
    }

    Tensor concat_rows(const std::vector<Tensor>& parts) {
        if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
        int total = 0;
        for (const auto& p : parts) {
            check_tape(p, "concat_rows");
            if (p.cols() != parts[0].cols())
                throw std::invalid_argument("concat_rows: column mismatch (" + dims(parts[0]) +
                                            " vs " + dims(p) + ")");
            total += p.rows();
        }
        NodePtr out = make_node(total, parts[0].cols());
        std::vector<NodePtr> ns;
        ns.reserve(parts.size());
        for (const auto& p : parts) ns.push_back(p.n_);
        std::size_t off = 0;
        for (const auto& n : ns) {
            std::copy(n->val.begin(), n->val.end(), out->val.begin() + off);
            off += n->size();
        }
        record([ns, out]() {
            std::size_t off = 0;
            for (const auto& n : ns) {
                for (std::size_t i = 0; i < n->size(); ++i) n->grad[i] += out->grad[off + i];
                off += n->size();
            }
        });
        return Tensor(out);
    }

    Tensor transpose(const Tensor& a) {
        check_tape(a, "transpose");
        NodePtr out = make_node(a.cols(), a.rows());
        const auto an = a.n_;
        const int r = a.rows(), c = a.cols();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                out->val[static_cast<std::size_t>(j) * r + i] =
                    an->val[static_cast<std::size_t>(i) * c + j];
        record([an, out, r, c]() {
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j)
                    an->grad[static_cast<std::size_t>(i) * c + j] +=
                        out->grad[static_cast<std::size_t>(j) * r + i];
        });
        return Tensor(out);
    }

    Tensor softmax_rowwise(const Tensor& a) {
        check_tape(a, "softmax_rowwise");
        NodePtr out = make_node(a.rows(), a.cols());
        const auto an = a.n_;
        const int r = a.rows(), c = a.cols();
        for (int i = 0; i < r; ++i) {
            const double* x = &an->val[static_cast<std::size_t>(i) * c];
            double* y = &out->val[static_cast<std::size_t>(i) * c];
            double mx = x[0];
            for (int j = 1; j < c; ++j) mx = std::max(mx, x[j]);
            double z = 0.0;
            for (int j = 0; j < c; ++j) {
                y[j] = std::exp(x[j] - mx);
                z += y[j];
            }
            for (int j = 0; j < c; ++j) y[j] /= z;
        }
        record([an, out, r, c]() {
            for (int i = 0; i < r; ++i) {
                const double* y = &out->val[static_cast<std::size_t>(i) * c];
                const double* gy = &out->grad[static_cast<std::size_t>(i) * c];
                double dot = 0.0;
                for (int j = 0; j < c; ++j) dot += gy[j] * y[j];
                double* gx = &an->grad[static_cast<std::size_t>(i) * c];
                for (int j = 0; j < c; ++j) gx[j] += y[j] * (gy[j] - dot);
            }
        });
        return Tensor(out);
    }

    // Row-wise standardization: y = (x - mean) / sqrt(var + eps), biased var.
    Tensor layernorm_rowwise(const Tensor& a, double eps = 1e-5) {
        check_tape(a, "layernorm_rowwise");
        NodePtr out = make_node(a.rows(), a.cols());
        const auto an = a.n_;
        const int r = a.rows(), c = a.cols();
        auto inv_sigma = std::make_shared<std::vector<double>>(r);
        for (int i = 0; i < r; ++i) {
            const double* x = &an->val[static_cast<std::size_t>(i) * c];
            double mu = 0.0;
            for (int j = 0; j < c; ++j) mu += x[j];
            mu /= c;
            double var = 0.0;
            for (int j = 0; j < c; ++j) var += (x[j] - mu) * (x[j] - mu);
            var /= c;
            const double is = 1.0 / std::sqrt(var + eps);
            (*inv_sigma)[i] = is;
            double* y = &out->val[static_cast<std::size_t>(i) * c];
            for (int j = 0; j < c; ++j) y[j] = (x[j] - mu) * is;
        }
        record([an, out, inv_sigma, r, c]() {
            for (int i = 0; i < r; ++i) {
                const double* y = &out->val[static_cast<std::size_t>(i) * c];
                const double* gy = &out->grad[static_cast<std::size_t>(i) * c];
                double mg = 0.0, mgy = 0.0;
                for (int j = 0; j < c; ++j) {
                    mg += gy[j];
                    mgy += gy[j] * y[j];
                }
                mg /= c;
                mgy /= c;
                const double is = (*inv_sigma)[i];
                double* gx = &an->grad[static_cast<std::size_t>(i) * c];
                for (int j = 0; j < c; ++j) gx[j] += is * (gy[j] - mg - y[j] * mgy);
            }
        });
        return Tensor(out);
    }

    // out[i,j] = a[i,j] + v[0,j]; v broadcast over rows.
    Tensor add_rowvec(const Tensor& a, const Tensor& v) {
        check_tape(a, "add_rowvec");
        check_tape(v, "add_rowvec");
        if (v.rows() != 1 || v.cols() != a.cols())
            throw std::invalid_argument("add_rowvec: shape mismatch (" + dims(a) + " vs " +
                                        dims(v) + ")");
        NodePtr out = make_node(a.rows(), a.cols());
        const auto an = a.n_, vn = v.n_;
        const int r = a.rows(), c = a.cols();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                out->val[static_cast<std::size_t>(i) * c + j] =
                    an->val[static_cast<std::size_t>(i) * c + j] + vn->val[j];
        record([an, vn, out, r, c]() {
            for (int i = 0; i < r; ++i) {
                const double* g = &out->grad[static_cast<std::size_t>(i) * c];
                double* ga = &an->grad[static_cast<std::size_t>(i) * c];
                for (int j = 0; j < c; ++j) {
                    ga[j] += g[j];
                    vn->grad[j] += g[j];
                }
            }
        });
        return Tensor(out);
    }

    // out[i,j] = a[i,j] * v[0,j].
    Tensor mul_rowvec(const Tensor& a, const Tensor& v) {
        check_tape(a, "mul_rowvec");
        check_tape(v, "mul_rowvec");
        if (v.rows() != 1 || v.cols() != a.cols())
            throw std::invalid_argument("mul_rowvec: shape mismatch (" + dims(a) + " vs " +
                                        dims(v) + ")");
        NodePtr out = make_node(a.rows(), a.cols());
        const auto an = a.n_, vn = v.n_;
        const int r = a.rows(), c = a.cols();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                out->val[static_cast<std::size_t>(i) * c + j] =
                    an->val[static_cast<std::size_t>(i) * c + j] * vn->val[j];
        record([an, vn, out, r, c]() {
            for (int i = 0; i < r; ++i) {
                const double* g = &out->grad[static_cast<std::size_t>(i) * c];
                const double* av = &an->val[static_cast<std::size_t>(i) * c];
                double* ga = &an->grad[static_cast<std::size_t>(i) * c];
                for (int j = 0; j < c; ++j) {
                    ga[j] += g[j] * vn->val[j];
                    vn->grad[j] += g[j] * av[j];
                }
            }
        });
        return Tensor(out);
    }

    // ---- reverse pass --------------------------------------------------

    void backward(const Tensor& loss) {
        check_tape(loss, "backward");
        if (!loss.is_scalar())
            throw std::invalid_argument("backward: loss must be scalar, got " + dims(loss));
        if (entries_.empty()) throw std::invalid_argument("backward: tape is empty");
        loss.n_->grad[0] = 1.0;
        for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
    }

private:
    std::vector<std::function<void()>> entries_;

    NodePtr make_node(int rows, int cols, bool requires_grad = false, std::string name = "") {
        auto n = std::make_shared<detail::Node>();
        n->rows = rows;
        n->cols = cols;
        n->val.assign(static_cast<std::size_t>(rows) * cols, 0.0);
        n->grad.assign(static_cast<std::size_t>(rows) * cols, 0.0);
        n->requires_grad = requires_grad;
        n->name = std::move(name);
        n->tape = this;
        return n;
    }

    void record(std::function<void()> back) { entries_.push_back(std::move(back)); }

    void check_tape(const Tensor& t, const char* op) const {
        if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
        if (t.n_->tape != this)
            throw std::invalid_argument(std::string(op) + ": tensor belongs to another tape");
    }

    static std::string dims(const Tensor& t) {
        return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
    }

    void require_same_shape(const Tensor& a, const Tensor& b, const char* op) const {
        if (a.rows() != b.rows() || a.cols() != b.cols())
            throw std::invalid_argument(std::string(op) + ": shape mismatch (" + dims(a) +
                                        " vs " + dims(b) + ")");
    }

    template <class F, class G>
    Tensor unary(const Tensor& a, F fwd, G dfdx) {
        check_tape(a, "unary");
        NodePtr out = make_node(a.rows(), a.cols());
        const auto an = a.n_;
        for (std::size_t i = 0; i < out->size(); ++i) out->val[i] = fwd(an->val[i]);
        record([an, out, dfdx]() {
            for (std::size_t i = 0; i < out->size(); ++i)
                an->grad[i] += out->grad[i] * dfdx(an->val[i], out->val[i]);
        });
        return Tensor(out);
    }

    Tensor binary_elementwise(const Tensor& a, const Tensor& b, const char* op, double bsign) {
        check_tape(a, op);
        check_tape(b, op);
        require_same_shape(a, b, op);
        NodePtr out = make_node(a.rows(), a.cols());
        const auto an = a.n_, bn = b.n_;
        for (std::size_t i = 0; i < out->size(); ++i)
            out->val[i] = an->val[i] + bsign * bn->val[i];
        record([an, bn, out, bsign]() {
            for (std::size_t i = 0; i < out->size(); ++i) {
                an->grad[i] += out->grad[i];
                bn->grad[i] += bsign * out->grad[i];
            }
        });
        return Tensor(out);
    }
};

}  // namespace prism::ad
