#include "binmhe/qp.hpp"

#include <cmath>
#include <limits>

namespace binmhe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Applies the symmetric reflection [[c, s], [s, -c]] to columns (i, j) of M.
void reflect_columns(Matrix& M, Eigen::Index i, Eigen::Index j, double c, double s) {
    for (Eigen::Index k = 0; k < M.rows(); ++k) {
        const double a = M(k, i);
        const double b = M(k, j);
        M(k, i) = c * a + s * b;
        M(k, j) = s * a - c * b;
    }
}

/// Working set of the dual method. With N the active normals (in >= form),
/// J' N = [R; 0] where J starts as L^{-T} for G = L L'.
struct WorkingSet {
    Matrix J;
    Matrix R;
    Eigen::Index size{0};
    std::vector<Eigen::Index> rows;
    Vector u;

    /// d = J' n for the entering normal. Rotates J so that d has a single
    /// nonzero beyond the current active block, then appends the new R column.
    void add(Vector d, Eigen::Index row, double multiplier) {
        const Eigen::Index n = J.rows();
        for (Eigen::Index j = n - 1; j > size; --j) {
            const double h = std::hypot(d(j - 1), d(j));
            if (h == 0.0) continue;
            const double c = d(j - 1) / h;
            const double s = d(j) / h;
            d(j - 1) = h;
            d(j) = 0.0;
            reflect_columns(J, j - 1, j, c, s);
        }
        R.col(size).head(size + 1) = d.head(size + 1);
        rows.push_back(row);
        u(size) = multiplier;
        ++size;
    }

    void remove(Eigen::Index pos) {
        rows.erase(rows.begin() + pos);
        for (Eigen::Index k = pos; k + 1 < size; ++k) {
            u(k) = u(k + 1);
            R.col(k) = R.col(k + 1);
        }
        R.col(size - 1).setZero();
        --size;
        // R is now upper Hessenberg from column pos on; restore triangular form.
        for (Eigen::Index j = pos; j < size; ++j) {
            const double h = std::hypot(R(j, j), R(j + 1, j));
            if (h == 0.0) continue;
            const double c = R(j, j) / h;
            const double s = R(j + 1, j) / h;
            for (Eigen::Index k = j; k < size; ++k) {
                const double a = R(j, k);
                const double b = R(j + 1, k);
                R(j, k) = c * a + s * b;
                R(j + 1, k) = s * a - c * b;
            }
            reflect_columns(J, j, j + 1, c, s);
        }
        if (size < R.rows()) R.row(size).setZero();
    }
};

}  // namespace

QpResult solve_dense_qp(const Matrix& G, const Vector& a, const Matrix& A, const Vector& b, int max_iterations) {
    const Eigen::Index n = G.rows();
    const Eigen::Index m = A.rows();
    if (G.cols() != n || a.size() != n || (m > 0 && A.cols() != n) || b.size() != m)
        throw InvalidInputError("solve_dense_qp: dimension mismatch");

    Eigen::LLT<Matrix> llt(G);
    if (llt.info() != Eigen::Success) throw SolverError("solve_dense_qp: Hessian is not positive definite");
    if (max_iterations <= 0) max_iterations = static_cast<int>(50 * (n + m) + 100);

    WorkingSet ws;
    const Matrix Linv = llt.matrixL().solve(Matrix::Identity(n, n));
    ws.J = Linv.transpose();
    ws.R = Matrix::Zero(n, n);
    ws.u = Vector::Zero(n);

    QpResult res;
    res.x = -llt.solve(a);
    res.multipliers = Vector::Zero(m);

    Vector row_norm(m);
    for (Eigen::Index i = 0; i < m; ++i) row_norm(i) = std::max(A.row(i).norm(), 1e-300);
    const double feas_tol = 1e-12 * (1.0 + (m ? b.cwiseAbs().maxCoeff() : 0.0));
    std::vector<char> is_active(static_cast<std::size_t>(m), 0);

    int iter = 0;
    while (true) {
        // Most violated row, measured in normalized slack.
        Eigen::Index p = -1;
        double worst = -feas_tol;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (is_active[static_cast<std::size_t>(i)]) continue;
            const double slack = (b(i) - A.row(i).dot(res.x)) / row_norm(i);
            if (slack < worst) {
                worst = slack;
                p = i;
            }
        }
        if (p < 0) {
            res.status = QpStatus::optimal;
            break;
        }

        const Vector np = -A.row(p).transpose();
        double u_plus = 0.0;
        bool added = false;
        while (!added) {
            if (++iter > max_iterations) {
                res.status = QpStatus::max_iterations;
                goto done;
            }
            const Eigen::Index q = ws.size;
            const Vector d = ws.J.transpose() * np;
            const Vector z = ws.J.rightCols(n - q) * d.tail(n - q);
            Vector r = Vector::Zero(q);
            if (q > 0) r = ws.R.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));

            double t1 = kInf;
            Eigen::Index drop = -1;
            for (Eigen::Index k = 0; k < q; ++k) {
                if (r(k) > 0.0) {
                    const double ratio = ws.u(k) / r(k);
                    if (ratio < t1) {
                        t1 = ratio;
                        drop = k;
                    }
                }
            }
            const double dz = d.tail(n - q).norm();
            const double slack = b(p) - A.row(p).dot(res.x);
            double t2 = kInf;
            if (dz > 1e-12 * std::max(d.norm(), 1e-300)) t2 = std::max(0.0, -slack) / z.dot(np);

            if (t1 == kInf && t2 == kInf) {
                res.status = QpStatus::infeasible;
                goto done;
            }
            if (t2 == kInf) {
                // Dual step only: the entering row is dependent on the active ones.
                ws.u.head(q) -= t1 * r;
                u_plus += t1;
                is_active[static_cast<std::size_t>(ws.rows[static_cast<std::size_t>(drop)])] = 0;
                ws.remove(drop);
                continue;
            }
            const double t = std::min(t1, t2);
            res.x += t * z;
            ws.u.head(q) -= t * r;
            u_plus += t;
            if (t2 <= t1) {
                ws.add(d, p, u_plus);
                is_active[static_cast<std::size_t>(p)] = 1;
                added = true;
            } else {
                is_active[static_cast<std::size_t>(ws.rows[static_cast<std::size_t>(drop)])] = 0;
                ws.remove(drop);
            }
        }
    }
done:
    res.iterations = iter;
    res.active = ws.rows;
    for (Eigen::Index k = 0; k < ws.size; ++k) res.multipliers(ws.rows[static_cast<std::size_t>(k)]) = std::max(0.0, ws.u(k));
    return res;
}

}  // namespace binmhe
