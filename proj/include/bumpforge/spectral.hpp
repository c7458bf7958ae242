#pragma once

#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include <fftw3.h>

#include "bumpforge/field.hpp"

namespace bumpforge {

/// Exact inverse of the Dirichlet operator -Lap_h + c on the interior nodes,
/// diagonalised by the type-I sine transform.
class ShiftedPoisson {
public:
    ShiftedPoisson(const Domain& dom, double shift) : dom_(dom), n_(dom.nodes() - 2) {
        if (!(shift > 0.0)) throw ConfigError("shifted Poisson solver needs a positive shift");
        const double h = dom.spacing();
        std::vector<double> lam1(static_cast<std::size_t>(n_));
        for (int j = 0; j < n_; ++j) {
            const double s = std::sin(std::numbers::pi * (j + 1) / (2.0 * (n_ + 1)));
            lam1[std::size_t(j)] = 4.0 * s * s / (h * h);
        }
        const double norm = std::pow(2.0 * (n_ + 1), dom.dim());
        const std::size_t count = dom.dim() == 1 ? std::size_t(n_) : std::size_t(n_) * std::size_t(n_);
        inv_.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            const double lam = dom.dim() == 1 ? lam1[i] : lam1[i % std::size_t(n_)] + lam1[i / std::size_t(n_)];
            inv_[i] = 1.0 / ((lam + shift) * norm);
        }
        buf_ = static_cast<double*>(fftw_malloc(sizeof(double) * count));
        std::lock_guard<std::mutex> lock(plan_mutex());
        plan_ = dom.dim() == 1 ? fftw_plan_r2r_1d(n_, buf_, buf_, FFTW_RODFT00, FFTW_ESTIMATE)
                               : fftw_plan_r2r_2d(n_, n_, buf_, buf_, FFTW_RODFT00, FFTW_RODFT00, FFTW_ESTIMATE);
    }

    ShiftedPoisson(const ShiftedPoisson&) = delete;
    ShiftedPoisson& operator=(const ShiftedPoisson&) = delete;

    ~ShiftedPoisson() {
        std::lock_guard<std::mutex> lock(plan_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(buf_);
    }

    /// out = (-Lap_h + c)^{-1} rhs on interior nodes, 0 on the boundary.
    void solve(std::span<const double> rhs, std::span<double> out) const {
        auto interior = [&](int j, int k) { return dom_.index(j + 1, dom_.dim() == 2 ? k + 1 : 0); };
        const int ny = dom_.dim() == 2 ? n_ : 1;
        for (int k = 0; k < ny; ++k)
            for (int j = 0; j < n_; ++j) buf_[std::size_t(k) * std::size_t(n_) + std::size_t(j)] = rhs[interior(j, k)];
        fftw_execute(plan_);
        for (std::size_t i = 0; i < inv_.size(); ++i) buf_[i] *= inv_[i];
        fftw_execute(plan_);
        std::fill(out.begin(), out.end(), 0.0);
        for (int k = 0; k < ny; ++k)
            for (int j = 0; j < n_; ++j) out[interior(j, k)] = buf_[std::size_t(k) * std::size_t(n_) + std::size_t(j)];
    }

private:
    static std::mutex& plan_mutex() {
        static std::mutex mu;
        return mu;
    }

    Domain dom_;
    int n_;
    std::vector<double> inv_;
    double* buf_ = nullptr;
    fftw_plan plan_ = nullptr;
};

} // namespace bumpforge
