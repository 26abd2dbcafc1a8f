#pragma once

#include <cmath>
#include <vector>

#include "chsav/errors.hpp"

namespace chsav::linalg {

/// Dense row-major square matrix, just enough for small Newton systems.
class Mat {
 public:
  Mat() = default;
  explicit Mat(int n) : n_(n), a_(static_cast<size_t>(n) * n, 0.0) {}
  int n() const { return n_; }
  double& operator()(int r, int c) { return a_[static_cast<size_t>(r) * n_ + c]; }
  double operator()(int r, int c) const { return a_[static_cast<size_t>(r) * n_ + c]; }
  void resize(int n) {
    n_ = n;
    a_.assign(static_cast<size_t>(n) * n, 0.0);
  }
  void zero() { std::fill(a_.begin(), a_.end(), 0.0); }

 private:
  int n_ = 0;
  std::vector<double> a_;
};

/// In-place LU with partial pivoting. Throws SingularJacobian on a zero pivot.
inline void lu_factor(Mat& a, std::vector<int>& piv) {
  const int n = a.n();
  piv.resize(n);
  for (int j = 0; j < n; ++j) {
    int p = j;
    double best = std::abs(a(j, j));
    for (int i = j + 1; i < n; ++i) {
      const double v = std::abs(a(i, j));
      if (v > best) {
        best = v;
        p = i;
      }
    }
    piv[j] = p;
    if (best == 0.0) throw SingularJacobian("dense LU: zero pivot");
    if (p != j)
      for (int c = 0; c < n; ++c) std::swap(a(j, c), a(p, c));
    const double inv = 1.0 / a(j, j);
    for (int i = j + 1; i < n; ++i) {
      const double l = a(i, j) * inv;
      a(i, j) = l;
      if (l != 0.0)
        for (int c = j + 1; c < n; ++c) a(i, c) -= l * a(j, c);
    }
  }
}

inline void lu_solve(const Mat& a, const std::vector<int>& piv, std::vector<double>& b) {
  const int n = a.n();
  for (int j = 0; j < n; ++j) {
    if (piv[j] != j) std::swap(b[j], b[piv[j]]);
    for (int i = j + 1; i < n; ++i) b[i] -= a(i, j) * b[j];
  }
  for (int j = n - 1; j >= 0; --j) {
    b[j] /= a(j, j);
    for (int i = 0; i < j; ++i) b[i] -= a(i, j) * b[j];
  }
}

/// Band matrix in LAPACK GB storage: entry (i,j) lives at ab[j*ldab + kl+ku + i-j].
/// The extra kl rows on top absorb fill from partial pivoting.
class BandMat {
 public:
  BandMat() = default;
  BandMat(int n, int kl, int ku) { resize(n, kl, ku); }

  void resize(int n, int kl, int ku) {
    n_ = n;
    kl_ = kl;
    ku_ = ku;
    ldab_ = 2 * kl + ku + 1;
    ab_.assign(static_cast<size_t>(ldab_) * n, 0.0);
    factored_ = false;
  }

  void zero() {
    std::fill(ab_.begin(), ab_.end(), 0.0);
    factored_ = false;
  }

  int n() const { return n_; }
  int kl() const { return kl_; }
  int ku() const { return ku_; }

  bool in_band(int i, int j) const { return i - j <= kl_ && j - i <= ku_; }

  double& at(int i, int j) { return ab_[static_cast<size_t>(j) * ldab_ + (kl_ + ku_ + i - j)]; }
  double at(int i, int j) const { return ab_[static_cast<size_t>(j) * ldab_ + (kl_ + ku_ + i - j)]; }

  // Partial-pivoted band LU (gbtrf style); fill widens the upper band to kl+ku.
  void factor() {
    piv_.resize(n_);
    const int klu = kl_ + ku_;
    for (int j = 0; j < n_; ++j) {
      const int iend = std::min(n_ - 1, j + kl_);
      int p = j;
      double best = std::abs(entry(j, j));
      for (int i = j + 1; i <= iend; ++i) {
        const double v = std::abs(entry(i, j));
        if (v > best) {
          best = v;
          p = i;
        }
      }
      piv_[j] = p;
      if (best == 0.0) throw SingularJacobian("band LU: zero pivot");
      const int cend = std::min(n_ - 1, j + klu);
      if (p != j)
        for (int c = j; c <= cend; ++c) std::swap(entry(j, c), entry(p, c));
      const double inv = 1.0 / entry(j, j);
      for (int i = j + 1; i <= iend; ++i) {
        const double l = entry(i, j) * inv;
        entry(i, j) = l;
        if (l != 0.0)
          for (int c = j + 1; c <= cend; ++c) entry(i, c) -= l * entry(j, c);
      }
    }
    factored_ = true;
  }

  void solve(std::vector<double>& b) const {
    const int klu = kl_ + ku_;
    for (int j = 0; j < n_; ++j) {
      if (piv_[j] != j) std::swap(b[j], b[piv_[j]]);
      const int iend = std::min(n_ - 1, j + kl_);
      for (int i = j + 1; i <= iend; ++i) b[i] -= entry(i, j) * b[j];
    }
    for (int j = n_ - 1; j >= 0; --j) {
      b[j] /= entry(j, j);
      const int ibeg = std::max(0, j - klu);
      for (int i = ibeg; i < j; ++i) b[i] -= entry(i, j) * b[j];
    }
  }

 private:
  // Same as at(), but valid over the widened fill band used during factorization.
  double& entry(int i, int j) { return ab_[static_cast<size_t>(j) * ldab_ + (kl_ + ku_ + i - j)]; }
  double entry(int i, int j) const { return ab_[static_cast<size_t>(j) * ldab_ + (kl_ + ku_ + i - j)]; }

  int n_ = 0, kl_ = 0, ku_ = 0, ldab_ = 0;
  bool factored_ = false;
  std::vector<double> ab_;
  std::vector<int> piv_;
};

}  // namespace chsav::linalg
