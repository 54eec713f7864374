#pragma once

// Exact geometric predicates: a floating-point filter with an exact rational
// fallback, plus symbolic perturbation of heights for the lifted test.

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <limits>

namespace maeigen::predicates {

using Rational = boost::multiprecision::cpp_rational;

inline Rational exact(double v) {
  if (v == 0.0) return Rational(0);
  int exponent = 0;
  const double mant = std::frexp(v, &exponent);
  // mant in [0.5, 1): 53 significant bits
  const auto scaled = static_cast<std::int64_t>(std::ldexp(mant, 53));
  exponent -= 53;
  boost::multiprecision::cpp_int num(scaled);
  if (exponent >= 0) {
    num <<= exponent;
    return Rational(num);
  }
  boost::multiprecision::cpp_int den(1);
  den <<= -exponent;
  return Rational(num, den);
}

inline int sign_of(const Rational& r) { return r.sign(); }

inline constexpr double kEps = std::numeric_limits<double>::epsilon() * 0.5;
inline constexpr double kCcwBound = (3.0 + 16.0 * kEps) * kEps;
inline constexpr double kO3dBound = (7.0 + 56.0 * kEps) * kEps;

/// Sign of the signed area of (a, b, c): +1 counterclockwise, -1 clockwise, 0 collinear.
inline int orient2d(double ax, double ay, double bx, double by, double cx, double cy) {
  const double left = (ax - cx) * (by - cy);
  const double right = (ay - cy) * (bx - cx);
  const double det = left - right;
  const double bound = kCcwBound * (std::abs(left) + std::abs(right));
  if (det > bound) return 1;
  if (-det > bound) return -1;
  const Rational d = (exact(ax) - exact(cx)) * (exact(by) - exact(cy)) -
                     (exact(ay) - exact(cy)) * (exact(bx) - exact(cx));
  return sign_of(d);
}

struct Lifted {
  double x;
  double y;
  double z;
  std::int64_t rank;  // symbolic perturbation order; smaller rank = larger perturbation
};

/// Unperturbed sign of det[a-d; b-d; c-d] over lifted points. For counterclockwise
/// (a, b, c) this is positive exactly when d lies strictly below the plane through a, b, c.
inline int power_raw(const Lifted& a, const Lifted& b, const Lifted& c, const Lifted& d) {
  const double adx = a.x - d.x, ady = a.y - d.y, adz = a.z - d.z;
  const double bdx = b.x - d.x, bdy = b.y - d.y, bdz = b.z - d.z;
  const double cdx = c.x - d.x, cdy = c.y - d.y, cdz = c.z - d.z;
  const double bc = bdx * cdy - cdx * bdy;
  const double ca = cdx * ady - adx * cdy;
  const double ab = adx * bdy - bdx * ady;
  const double det = adz * bc + bdz * ca + cdz * ab;
  const double perm = (std::abs(bdx * cdy) + std::abs(cdx * bdy)) * std::abs(adz) +
                      (std::abs(cdx * ady) + std::abs(adx * cdy)) * std::abs(bdz) +
                      (std::abs(adx * bdy) + std::abs(bdx * ady)) * std::abs(cdz);
  const double bound = kO3dBound * perm;
  if (det > bound) return 1;
  if (-det > bound) return -1;
  const Rational eadx = exact(a.x) - exact(d.x), eady = exact(a.y) - exact(d.y),
                 eadz = exact(a.z) - exact(d.z);
  const Rational ebdx = exact(b.x) - exact(d.x), ebdy = exact(b.y) - exact(d.y),
                 ebdz = exact(b.z) - exact(d.z);
  const Rational ecdx = exact(c.x) - exact(d.x), ecdy = exact(c.y) - exact(d.y),
                 ecdz = exact(c.z) - exact(d.z);
  const Rational e = eadz * (ebdx * ecdy - ecdx * ebdy) + ebdz * (ecdx * eady - eadx * ecdy) +
                     ecdz * (eadx * ebdy - ebdx * eady);
  return sign_of(e);
}

/// Lifted "d below plane(a,b,c)" test with every height lowered by eps^rank.
/// Returns +1 (below) or -1 (above); never 0 when (a, b, c) is a proper triangle.
inline int power(const Lifted& a, const Lifted& b, const Lifted& c, const Lifted& d) {
  const int s = power_raw(a, b, c, d);
  if (s != 0) return s;
  // d(det)/d(z_k): orient(d,b,c), orient(d,c,a), orient(d,a,b), -orient(a,b,c).
  // Lowering z_k by eps^rank changes det by -eps^rank * derivative.
  struct Term {
    std::int64_t rank;
    int deriv;
  };
  Term terms[4] = {
      {a.rank, orient2d(d.x, d.y, b.x, b.y, c.x, c.y)},
      {b.rank, orient2d(d.x, d.y, c.x, c.y, a.x, a.y)},
      {c.rank, orient2d(d.x, d.y, a.x, a.y, b.x, b.y)},
      {d.rank, -orient2d(a.x, a.y, b.x, b.y, c.x, c.y)},
  };
  const Term* best = nullptr;
  for (const auto& t : terms) {
    if (t.deriv == 0) continue;
    if (best == nullptr || t.rank < best->rank) best = &t;
  }
  if (best == nullptr) return 0;
  return -best->deriv;
}

}  // namespace maeigen::predicates
