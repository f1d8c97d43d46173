#pragma once
#include <algorithm>
#include <cmath>

namespace metastab {

// Point/covector in R^n, n <= 2. The unused component of a 1D vector stays
// zero, so dot products and quadratic forms are dimension-agnostic.
struct Vec {
  double v[2]{0.0, 0.0};
  Vec() = default;
  explicit Vec(double x) : v{x, 0.0} {}
  Vec(double x, double y) : v{x, y} {}
  double& operator[](int i) { return v[i]; }
  double operator[](int i) const { return v[i]; }
};

inline Vec operator+(Vec a, Vec b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Vec operator-(Vec a, Vec b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Vec operator-(Vec a) { return {-a[0], -a[1]}; }
inline Vec operator*(double s, Vec a) { return {s * a[0], s * a[1]}; }
inline double dot(Vec a, Vec b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm2(Vec a) { return dot(a, a); }
inline double norm(Vec a) { return std::sqrt(norm2(a)); }

// Symmetric n x n matrix, n <= 2. 1D instances pad the (2,2) entry with 1 and
// keep a12 = 0, so the 2x2 closed forms (inverse, quadratic form against
// zero-padded vectors) remain valid without branching on n. Operations that
// genuinely depend on the dimension (eigenvalues, traces) take n explicitly.
struct SymMat {
  double a11 = 1.0, a12 = 0.0, a22 = 1.0;
  static SymMat identity() { return {}; }
  static SymMat scalar(double a) { return {a, 0.0, 1.0}; }  // 1D value
  static SymMat diag(double a, double b) { return {a, 0.0, b}; }
  static SymMat full(double a11, double a12, double a22) { return {a11, a12, a22}; }
};

inline Vec matvec(const SymMat& A, Vec p) {
  return {A.a11 * p[0] + A.a12 * p[1], A.a12 * p[0] + A.a22 * p[1]};
}
inline double quadform(const SymMat& A, Vec p) { return dot(p, matvec(A, p)); }
inline double det2(const SymMat& A) { return A.a11 * A.a22 - A.a12 * A.a12; }

inline SymMat inverse(const SymMat& A) {
  double d = det2(A);
  return {A.a22 / d, -A.a12 / d, A.a11 / d};
}

inline SymMat operator+(const SymMat& A, const SymMat& B) {
  return {A.a11 + B.a11, A.a12 + B.a12, A.a22 + B.a22};
}
inline SymMat operator-(const SymMat& A, const SymMat& B) {
  return {A.a11 - B.a11, A.a12 - B.a12, A.a22 - B.a22};
}
inline SymMat operator*(double s, const SymMat& A) {
  return {s * A.a11, s * A.a12, s * A.a22};
}

// A + s*I on the true n x n block only; keeps the 1D padding intact.
inline SymMat shift_diag(SymMat A, double s, int n) {
  A.a11 += s;
  if (n > 1) A.a22 += s;
  return A;
}

// (1-w)*A + w*B. Convex blends preserve the 1D padding.
inline SymMat lerp(const SymMat& A, const SymMat& B, double w) {
  return {A.a11 + w * (B.a11 - A.a11), A.a12 + w * (B.a12 - A.a12),
          A.a22 + w * (B.a22 - A.a22)};
}

inline void eigenvalues(const SymMat& A, int n, double& lo, double& hi) {
  if (n == 1) {
    lo = hi = A.a11;
    return;
  }
  double m = 0.5 * (A.a11 + A.a22);
  double d = std::hypot(0.5 * (A.a11 - A.a22), A.a12);
  lo = m - d;
  hi = m + d;
}

// Eigenpairs for n = 2, ascending; e2 is e1 rotated by +90 degrees.
inline void eigen2(const SymMat& A, double& l1, double& l2, Vec& e1, Vec& e2) {
  eigenvalues(A, 2, l1, l2);
  if (std::abs(A.a12) < 1e-300 * (std::abs(A.a11) + std::abs(A.a22)) + 1e-300) {
    if (A.a11 <= A.a22) {
      e1 = {1.0, 0.0};
      e2 = {0.0, 1.0};
    } else {
      e1 = {0.0, 1.0};
      e2 = {-1.0, 0.0};
    }
    return;
  }
  Vec u{l1 - A.a22, A.a12};
  double nu = norm(u);
  e1 = (1.0 / nu) * u;
  e2 = {-e1[1], e1[0]};
}

inline double spectral_norm(const SymMat& A, int n) {
  double lo, hi;
  eigenvalues(A, n, lo, hi);
  return std::max(std::abs(lo), std::abs(hi));
}

inline double trace(const SymMat& A, int n) {
  return n == 1 ? A.a11 : A.a11 + A.a22;
}

// PSD square root; closed form (A + sqrt(det) I) / sqrt(tr + 2 sqrt(det)).
inline SymMat sqrt_psd(const SymMat& A, int n) {
  if (n == 1) return SymMat::scalar(std::sqrt(A.a11));
  double s = std::sqrt(std::max(det2(A), 0.0));
  double t = std::sqrt(std::max(A.a11 + A.a22 + 2.0 * s, 0.0));
  return {(A.a11 + s) / t, A.a12 / t, (A.a22 + s) / t};
}

inline double clamp(double x, double lo, double hi) {
  return std::min(std::max(x, lo), hi);
}

}  // namespace metastab
